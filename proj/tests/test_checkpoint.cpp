// SPDX-License-Identifier: Apache-2.0
//
// ICHK checkpoint container: roundtrips, manifest validation, strict
// parameter assignment, and weight hashing.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>

#include "ichor/checkpoint.hpp"
#include "test_util.hpp"

using namespace ichor;
namespace fs = std::filesystem;

namespace {

struct Pack {
  Mat<float> a{2, 3};
  Mat<float> b{4, 1};
  std::vector<ParamRef<float>> refs() { return {{"layer.a", &a}, {"layer.b", &b}}; }
};

Pack random_pack(std::uint64_t seed) {
  Pack p;
  Rng rng(seed);
  ichor::test::random_fill(p.a, rng);
  ichor::test::random_fill(p.b, rng);
  return p;
}

void rewrite(const fs::path& from, const fs::path& to,
             const std::function<void(std::vector<unsigned char>&)>& mutate) {
  auto bytes = ichor::test::read_bytes(from);
  mutate(bytes);
  std::ofstream out(to, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint: save, load, assign roundtrip is bit-exact") {
  const fs::path dir = ichor::test::temp_dir("ckpt");
  Pack src = random_pack(1);
  const fs::path p = dir / "w.ichk";
  save_checkpoint<float>(p, {{"stage", "pretrain"}, {"step", 7}}, src.refs());

  const CheckpointFile file = load_checkpoint(p);
  CHECK(file.meta["stage"] == "pretrain");
  CHECK(file.meta["step"] == 7);
  CHECK(file.meta["format_version"] == 1);
  REQUIRE(file.tensors.size() == 2);
  CHECK(file.tensors.at("layer.a").rows == 2);
  CHECK(file.tensors.at("layer.a").cols == 3);

  Pack dst;
  dst.a.setZero();
  dst.b.setZero();
  auto refs = dst.refs();
  assign_params(file, refs);
  CHECK(std::memcmp(dst.a.data(), src.a.data(), sizeof(float) * 6) == 0);
  CHECK(std::memcmp(dst.b.data(), src.b.data(), sizeof(float) * 4) == 0);

  SUBCASE("writing the same tensors twice produces identical files") {
    const fs::path q = dir / "w2.ichk";
    save_checkpoint<float>(q, {{"stage", "pretrain"}, {"step", 7}}, src.refs());
    CHECK(ichor::test::read_bytes(p) == ichor::test::read_bytes(q));
  }
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: malformed files are rejected") {
  const fs::path dir = ichor::test::temp_dir("ckpt_bad");
  Pack src = random_pack(2);
  const fs::path p = dir / "w.ichk";
  save_checkpoint<float>(p, {{"stage", "pretrain"}}, src.refs());

  SUBCASE("bad magic") {
    rewrite(p, dir / "m.ichk", [](auto& b) { b[0] = 'X'; });
    CHECK_THROWS_AS(load_checkpoint(dir / "m.ichk"), BadMagicError);
  }
  SUBCASE("header length past the end") {
    rewrite(p, dir / "h.ichk", [](auto& b) { b[8] = 0xff; b[9] = 0xff; });
    CHECK_THROWS_AS(load_checkpoint(dir / "h.ichk"), HeaderError);
  }
  SUBCASE("unsupported version") {
    auto bytes = ichor::test::read_bytes(p);
    const std::string needle = "\"format_version\":1";
    const std::string repl = "\"format_version\":9";
    auto it = std::search(bytes.begin(), bytes.end(), needle.begin(), needle.end());
    REQUIRE(it != bytes.end());
    std::copy(repl.begin(), repl.end(), it);
    std::ofstream(dir / "v.ichk", std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_checkpoint(dir / "v.ichk"), HeaderError);
  }
  SUBCASE("truncated payload") {
    auto bytes = ichor::test::read_bytes(p);
    bytes.resize(bytes.size() - 4);
    std::ofstream(dir / "t.ichk", std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(load_checkpoint(dir / "t.ichk"), PayloadLengthError);
  }
  SUBCASE("not a checkpoint at all") {
    std::ofstream(dir / "short.ichk", std::ios::binary) << "hi";
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ichk"), BadMagicError);
  }
  fs::remove_all(dir);
}

TEST_CASE("assign_params: name, dtype, and shape policing") {
  const fs::path dir = ichor::test::temp_dir("ckpt_assign");
  Pack src = random_pack(3);
  const fs::path p = dir / "w.ichk";
  save_checkpoint<float>(p, {}, src.refs());
  const CheckpointFile file = load_checkpoint(p);

  SUBCASE("missing tensor is named") {
    Pack dst;
    Mat<float> extra(1, 1);
    auto refs = dst.refs();
    refs.push_back({"layer.c", &extra});
    CHECK_THROWS_WITH_AS(assign_params(file, refs), doctest::Contains("layer.c"), DataError);
  }
  SUBCASE("unused tensor in the file is named") {
    Pack dst;
    auto refs = dst.refs();
    refs.pop_back();
    CHECK_THROWS_WITH_AS(assign_params(file, refs), doctest::Contains("layer.b"), DataError);
  }
  SUBCASE("shape mismatch") {
    Pack dst;
    dst.a.resize(3, 2);
    auto refs = dst.refs();
    CHECK_THROWS_AS(assign_params(file, refs), ShapeError);
  }
  SUBCASE("dtype mismatch") {
    Mat<double> a64(2, 3), b64(4, 1);
    std::vector<ParamRef<double>> refs{{"layer.a", &a64}, {"layer.b", &b64}};
    CHECK_THROWS_AS(assign_params(file, refs), DataError);
  }
  fs::remove_all(dir);
}

TEST_CASE("hash_params: stable, order-sensitive, content-sensitive") {
  Pack p1 = random_pack(4);
  Pack p2 = random_pack(4);
  auto r1 = p1.refs();
  auto r2 = p2.refs();
  CHECK(hash_params(r1) == hash_params(r2));
  CHECK(hash_params(r1).size() == 16);  // 64-bit hex

  p2.b(0, 0) += 1e-7f;
  auto r2b = p2.refs();
  CHECK(hash_params(r1) != hash_params(r2b));

  // Same bytes under different names must hash differently.
  std::vector<ParamRef<float>> renamed{{"layer.a", &p1.a}, {"layer.c", &p1.b}};
  CHECK(hash_params(r1) != hash_params(renamed));
}
