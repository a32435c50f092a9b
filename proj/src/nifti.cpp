#include "zsbc/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <vector>

#include "zsbc/errors.hpp"

namespace zsbc {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t DT_UINT8 = 2;
constexpr int16_t DT_INT16 = 4;
constexpr int16_t DT_INT32 = 8;
constexpr int16_t DT_FLOAT32 = 16;
constexpr int16_t DT_FLOAT64 = 64;
constexpr int16_t DT_INT8 = 256;
constexpr int16_t DT_UINT16 = 512;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// gzread handles both gzip streams and plain files transparently.
std::vector<char> read_all_bytes(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::vector<char> bytes;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) bytes.insert(bytes.end(), buf, buf + n);
    const bool read_error = n < 0;
    gzclose(f);
    if (read_error) throw IoError("read failure on " + path);
    return bytes;
}

template <typename T>
void convert_voxels(const char* src, int64_t count, Tensor& out, real slope, real inter) {
    for (int64_t i = 0; i < count; ++i) {
        T v;
        std::memcpy(&v, src + i * sizeof(T), sizeof(T));
        out[i] = static_cast<real>(v) * slope + inter;
    }
}

Affine affine_from_quaternion(const Nifti1Header& h) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    const double a = std::sqrt(std::max(0.0, 1.0 - b * b - c * c - d * d));
    const double qfac = (h.pixdim[0] < 0.0f) ? -1.0 : 1.0;
    const double sx = h.pixdim[1], sy = h.pixdim[2], sz = h.pixdim[3] * qfac;
    Affine m = identity_affine();
    m[0][0] = (a * a + b * b - c * c - d * d) * sx;
    m[0][1] = (2 * b * c - 2 * a * d) * sy;
    m[0][2] = (2 * b * d + 2 * a * c) * sz;
    m[1][0] = (2 * b * c + 2 * a * d) * sx;
    m[1][1] = (a * a + c * c - b * b - d * d) * sy;
    m[1][2] = (2 * c * d - 2 * a * b) * sz;
    m[2][0] = (2 * b * d - 2 * a * c) * sx;
    m[2][1] = (2 * c * d + 2 * a * b) * sy;
    m[2][2] = (a * a + d * d - c * c - b * b) * sz;
    m[0][3] = h.qoffset_x;
    m[1][3] = h.qoffset_y;
    m[2][3] = h.qoffset_z;
    return m;
}

std::string dtype_name(int16_t dt) {
    switch (dt) {
        case DT_UINT8: return "uint8";
        case DT_INT8: return "int8";
        case DT_INT16: return "int16";
        case DT_UINT16: return "uint16";
        case DT_INT32: return "int32";
        case DT_FLOAT32: return "float32";
        case DT_FLOAT64: return "float64";
        default: return "unknown(" + std::to_string(dt) + ")";
    }
}

}  // namespace

Volume read_volume(const std::string& path) {
    const std::vector<char> bytes = read_all_bytes(path);
    if (bytes.size() < sizeof(Nifti1Header)) throw IoError("malformed NIfTI header (truncated): " + path);

    Nifti1Header h;
    std::memcpy(&h, bytes.data(), sizeof(h));
    if (h.sizeof_hdr != 348) {
        int32_t swapped = __builtin_bswap32(static_cast<uint32_t>(h.sizeof_hdr));
        if (swapped == 348) throw IoError("byte-swapped NIfTI files are not supported: " + path);
        throw IoError("malformed NIfTI header (sizeof_hdr != 348): " + path);
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0) {
        if (std::strncmp(h.magic, "ni1", 3) == 0)
            throw IoError("two-file NIfTI (.hdr/.img) is not supported: " + path);
        throw IoError("malformed NIfTI header (bad magic): " + path);
    }

    const int ndim = h.dim[0];
    if (ndim < 3) throw IoError("image is not 3D (dim[0]=" + std::to_string(ndim) + "): " + path);
    for (int k = 4; k <= ndim && k < 8; ++k)
        if (h.dim[k] > 1)
            throw IoError("image is not 3D (extra dimension of extent " + std::to_string(h.dim[k]) +
                          "): " + path);

    const int64_t W = h.dim[1], H = h.dim[2], D = h.dim[3];
    if (W < 1 || H < 1 || D < 1) throw IoError("malformed NIfTI header (non-positive extent): " + path);
    const int64_t count = W * H * D;

    const real slope = (h.scl_slope == 0.0f) ? 1.0 : static_cast<real>(h.scl_slope);
    const real inter = static_cast<real>(h.scl_inter);

    int elem_size;
    switch (h.datatype) {
        case DT_UINT8: case DT_INT8: elem_size = 1; break;
        case DT_INT16: case DT_UINT16: elem_size = 2; break;
        case DT_INT32: case DT_FLOAT32: elem_size = 4; break;
        case DT_FLOAT64: elem_size = 8; break;
        default: throw IoError("unsupported NIfTI datatype " + dtype_name(h.datatype) + ": " + path);
    }

    const int64_t offset = static_cast<int64_t>(h.vox_offset);
    if (offset < 348 || offset + count * elem_size > static_cast<int64_t>(bytes.size()))
        throw IoError("malformed NIfTI file (data extends past EOF): " + path);
    const char* voxels = bytes.data() + offset;

    Volume vol;
    vol.data = Tensor({D, H, W});
    switch (h.datatype) {
        case DT_UINT8: convert_voxels<uint8_t>(voxels, count, vol.data, slope, inter); break;
        case DT_INT8: convert_voxels<int8_t>(voxels, count, vol.data, slope, inter); break;
        case DT_INT16: convert_voxels<int16_t>(voxels, count, vol.data, slope, inter); break;
        case DT_UINT16: convert_voxels<uint16_t>(voxels, count, vol.data, slope, inter); break;
        case DT_INT32: convert_voxels<int32_t>(voxels, count, vol.data, slope, inter); break;
        case DT_FLOAT32: convert_voxels<float>(voxels, count, vol.data, slope, inter); break;
        case DT_FLOAT64: convert_voxels<double>(voxels, count, vol.data, slope, inter); break;
        default: break;
    }
    vol.source_dtype = dtype_name(h.datatype);

    for (int i = 0; i < 3; ++i) {
        const float p = h.pixdim[i + 1];
        vol.spacing[static_cast<size_t>(i)] = p > 0.0f ? static_cast<double>(p) : 1.0;
    }

    if (h.sform_code > 0) {
        Affine m = identity_affine();
        for (int j = 0; j < 4; ++j) {
            m[0][j] = h.srow_x[j];
            m[1][j] = h.srow_y[j];
            m[2][j] = h.srow_z[j];
        }
        vol.affine = m;
    } else if (h.qform_code > 0) {
        vol.affine = affine_from_quaternion(h);
    } else {
        Affine m = identity_affine();
        for (int i = 0; i < 3; ++i) m[i][i] = vol.spacing[static_cast<size_t>(i)];
        vol.affine = m;
    }
    return vol;
}

void write_volume(const Volume& volume, const std::string& path) {
    if (volume.data.rank() != 3) throw IoError("write_volume: data must be [D,H,W]");
    const int64_t D = volume.data.dim(0), H = volume.data.dim(1), W = volume.data.dim(2);

    Nifti1Header h;
    std::memset(&h, 0, sizeof(h));
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<int16_t>(W);
    h.dim[2] = static_cast<int16_t>(H);
    h.dim[3] = static_cast<int16_t>(D);
    for (int k = 4; k < 8; ++k) h.dim[k] = 1;
    h.datatype = DT_FLOAT32;
    h.bitpix = 32;
    h.pixdim[0] = 1.0f;
    for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(volume.spacing[static_cast<size_t>(i)]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2;  // millimetres
    h.sform_code = 1;
    h.qform_code = 0;
    for (int j = 0; j < 4; ++j) {
        h.srow_x[j] = static_cast<float>(volume.affine[0][static_cast<size_t>(j)]);
        h.srow_y[j] = static_cast<float>(volume.affine[1][static_cast<size_t>(j)]);
        h.srow_z[j] = static_cast<float>(volume.affine[2][static_cast<size_t>(j)]);
    }
    std::memcpy(h.magic, "n+1\0", 4);

    std::vector<float> voxels(static_cast<size_t>(volume.data.size()));
    for (int64_t i = 0; i < volume.data.size(); ++i)
        voxels[static_cast<size_t>(i)] = static_cast<float>(volume.data[i]);

    const char extension[4] = {0, 0, 0, 0};
    if (ends_with(path, ".gz")) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw IoError("cannot open " + path + " for writing");
        bool ok = gzwrite(f, &h, sizeof(h)) == static_cast<int>(sizeof(h));
        ok = ok && gzwrite(f, extension, 4) == 4;
        const unsigned nbytes = static_cast<unsigned>(voxels.size() * sizeof(float));
        ok = ok && gzwrite(f, voxels.data(), nbytes) == static_cast<int>(nbytes);
        ok = (gzclose(f) == Z_OK) && ok;
        if (!ok) throw IoError("write failure on " + path);
    } else {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open " + path + " for writing");
        f.write(reinterpret_cast<const char*>(&h), sizeof(h));
        f.write(extension, 4);
        f.write(reinterpret_cast<const char*>(voxels.data()),
                static_cast<std::streamsize>(voxels.size() * sizeof(float)));
        if (!f) throw IoError("write failure on " + path);
    }
}

LabelMask read_mask(const std::string& path, const std::map<int, std::string>& label_spec,
                    const Volume* reference) {
    const Volume vol = read_volume(path);
    if (reference && vol.data.shape() != reference->data.shape()) {
        auto fmt = [](const std::vector<int64_t>& s) {
            std::string out;
            for (size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
            return out;
        };
        throw IoError("mask shape " + fmt(vol.data.shape()) + " does not match reference shape " +
                      fmt(reference->data.shape()) + ": " + path);
    }

    std::set<int> seen;
    for (int64_t i = 0; i < vol.data.size(); ++i) {
        const real v = vol.data[i];
        const real r = std::round(v);
        if (std::abs(v - r) > 1e-6 || r < 0.0)
            throw IoError("mask contains non-integer or negative value " + std::to_string(v) + ": " + path);
        seen.insert(static_cast<int>(r));
    }
    for (int label : seen)
        if (label != 0 && !label_spec.count(label))
            throw IoError("mask label " + std::to_string(label) + " is not in the label spec: " + path);

    LabelMask mask;
    mask.data = vol.data;
    mask.label_names = label_spec;
    return mask;
}

void write_mask(const LabelMask& mask, const Volume& geometry_from, const std::string& path) {
    Volume v;
    v.data = mask.data;
    v.spacing = geometry_from.spacing;
    v.affine = geometry_from.affine;
    write_volume(v, path);
}

}  // namespace zsbc
