#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "zsbc/errors.hpp"
#include "zsbc/nifti.hpp"

using namespace zsbc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "zsbc_io_test";
    fs::create_directories(dir);
    return dir;
}

Volume random_volume(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> ext(3, 12);
    std::uniform_real_distribution<float> val(-100.0f, 100.0f);
    Volume v;
    v.data = Tensor({ext(rng), ext(rng), ext(rng)});
    for (int64_t i = 0; i < v.data.size(); ++i) v.data[i] = val(rng);
    // float-representable geometry so header round-trips are exact
    for (auto& s : v.spacing) s = static_cast<float>(0.25 + 2.0 * std::generate_canonical<float, 24>(rng));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) v.affine[r][c] = val(rng);
    return v;
}

}  // namespace

TEST_CASE("write/read round-trip preserves data and geometry") {
    const fs::path dir = temp_dir();
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const Volume v = random_volume(seed);
        const std::string path = (dir / ("rt_" + std::to_string(seed) + ".nii")).string();
        write_volume(v, path);
        const Volume r = read_volume(path);
        REQUIRE(r.data.shape() == v.data.shape());
        for (int64_t i = 0; i < v.data.size(); ++i)
            CHECK(r.data[i] == static_cast<real>(static_cast<float>(v.data[i])));
        CHECK(r.spacing == v.spacing);
        CHECK(r.affine == v.affine);
    }
}

TEST_CASE("gz and plain payloads read identically") {
    const fs::path dir = temp_dir();
    const Volume v = random_volume(99);
    const std::string plain = (dir / "same.nii").string();
    const std::string gz = (dir / "same.nii.gz").string();
    write_volume(v, plain);
    write_volume(v, gz);

    // gz output is an actual gzip stream
    std::ifstream in(gz, std::ios::binary);
    unsigned char magic[2] = {0, 0};
    in.read(reinterpret_cast<char*>(magic), 2);
    CHECK(magic[0] == 0x1f);
    CHECK(magic[1] == 0x8b);

    const Volume a = read_volume(plain);
    const Volume b = read_volume(gz);
    REQUIRE(a.data.shape() == b.data.shape());
    for (int64_t i = 0; i < a.data.size(); ++i) CHECK(a.data[i] == b.data[i]);
    CHECK(a.affine == b.affine);
}

TEST_CASE("magic bytes sit at offset 344") {
    const fs::path dir = temp_dir();
    const Volume v = random_volume(7);
    const std::string path = (dir / "magic.nii").string();
    write_volume(v, path);
    std::ifstream in(path, std::ios::binary);
    in.seekg(344);
    char magic[4];
    in.read(magic, 4);
    CHECK(magic[0] == 'n');
    CHECK(magic[1] == '+');
    CHECK(magic[2] == '1');
    CHECK(magic[3] == '\0');
}

TEST_CASE("constant volume round-trips as constant") {
    const fs::path dir = temp_dir();
    Volume v;
    v.data = Tensor({4, 5, 6}, 2.5);
    const std::string path = (dir / "const.nii.gz").string();
    write_volume(v, path);
    const Volume r = read_volume(path);
    for (int64_t i = 0; i < r.data.size(); ++i) CHECK(r.data[i] == 2.5);
}

TEST_CASE("missing file and malformed headers raise distinct errors") {
    CHECK_THROWS_AS(read_volume("/nonexistent/nope.nii"), IoError);

    const fs::path dir = temp_dir();
    const std::string junk = (dir / "junk.nii").string();
    std::ofstream(junk, std::ios::binary) << "this is not a nifti file";
    CHECK_THROWS_AS(read_volume(junk), IoError);
}

TEST_CASE("4D files are rejected") {
    const fs::path dir = temp_dir();
    const Volume v = random_volume(3);
    const std::string path = (dir / "fourd.nii").string();
    write_volume(v, path);
    // patch dim[0]=4, dim[4]=2 in place
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    int16_t four = 4, two = 2;
    f.seekp(40);
    f.write(reinterpret_cast<char*>(&four), 2);
    f.seekp(40 + 4 * 2);
    f.write(reinterpret_cast<char*>(&two), 2);
    f.close();
    CHECK_THROWS_AS(read_volume(path), IoError);
}

TEST_CASE("scl_slope and scl_inter are applied on read") {
    const fs::path dir = temp_dir();
    Volume v;
    v.data = Tensor({2, 2, 2}, 10.0);
    const std::string path = (dir / "scaled.nii").string();
    write_volume(v, path);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    float slope = 2.0f, inter = 1.0f;
    f.seekp(112);
    f.write(reinterpret_cast<char*>(&slope), 4);
    f.write(reinterpret_cast<char*>(&inter), 4);
    f.close();
    const Volume r = read_volume(path);
    CHECK(r.data[0] == doctest::Approx(21.0));
}

TEST_CASE("mask validation") {
    const fs::path dir = temp_dir();
    Volume geometry;
    geometry.data = Tensor({4, 4, 4}, 0.0);

    // all-zero mask is valid with empty foreground
    LabelMask zero_mask;
    zero_mask.data = Tensor({4, 4, 4}, 0.0);
    const std::string zpath = (dir / "zeros.nii").string();
    write_mask(zero_mask, geometry, zpath);
    const LabelMask z = read_mask(zpath, {{1, "GM"}});
    CHECK(z.data.size() == 64);

    // unknown label is rejected, naming the label
    LabelMask bad;
    bad.data = Tensor({4, 4, 4}, 0.0);
    bad.data[5] = 7.0;
    const std::string bpath = (dir / "badlabel.nii").string();
    write_mask(bad, geometry, bpath);
    CHECK_THROWS_WITH_AS(read_mask(bpath, {{1, "GM"}}), doctest::Contains("7"), IoError);

    // shape mismatch vs the reference reports both shapes
    Volume other;
    other.data = Tensor({5, 4, 4}, 0.0);
    CHECK_THROWS_WITH_AS(read_mask(zpath, {{1, "GM"}}, &other), doctest::Contains("5x4x4"), IoError);

    // non-integer data is rejected
    Volume frac;
    frac.data = Tensor({4, 4, 4}, 0.0);
    frac.data[0] = 0.5;
    const std::string fpath = (dir / "frac.nii").string();
    write_volume(frac, fpath);
    CHECK_THROWS_AS(read_mask(fpath, {{1, "GM"}}), IoError);
}
