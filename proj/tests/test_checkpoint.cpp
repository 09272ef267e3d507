#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "latref/checkpoint.hpp"
#include "support/util.hpp"

#include <json.hpp>

using namespace latref;
using namespace latref::testing;

namespace {

std::string temp_ckpt(const char* name) {
  return std::string("/tmp/latref_ckpt_") + name + ".json";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  out << j.dump();
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save then load reproduces every parameter bit for bit") {
  const MlpModel m = MlpModel::init_random(6, 9, 14, 5, 31);
  const std::string path = temp_ckpt("roundtrip");
  save_checkpoint(m, path);
  const MlpModel back = load_checkpoint(path);
  CHECK(back.params() == m.params());
  CHECK(back.labels() == m.labels());
  std::remove(path.c_str());
}

TEST_CASE("round-trip preserves decode outputs exactly") {
  const MlpModel m = MlpModel::init_random(5, 7, 11, 5, 32);
  const std::string path = temp_ckpt("decode");
  save_checkpoint(m, path);
  const MlpModel back = load_checkpoint(path);
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const LatentState h = random_state(5, rng);
    CHECK(decode_answer(m, h).probabilities == decode_answer(back, h).probabilities);
    CHECK(states_equal_exact(m.step(h), back.step(h)));
  }
  std::remove(path.c_str());
}

TEST_CASE("version mismatch raises a version error") {
  const MlpModel m = MlpModel::init_random(3, 4, 5, 5, 34);
  const std::string path = temp_ckpt("version");
  save_checkpoint(m, path);
  auto j = read_json_file(path);
  j["format_version"] = 99;
  write_json_file(j, path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointVersionError);
  j["format_version"] = 1;
  j["backend_tag"] = "rnn";
  write_json_file(j, path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointVersionError);
  std::remove(path.c_str());
}

TEST_CASE("truncated parameter arrays raise a shape error") {
  const MlpModel m = MlpModel::init_random(3, 4, 5, 5, 35);
  const std::string path = temp_ckpt("shape");
  save_checkpoint(m, path);
  auto j = read_json_file(path);
  j["params"]["W1"].erase(0);  // drop a row
  write_json_file(j, path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointShapeError);

  save_checkpoint(m, path);
  j = read_json_file(path);
  j["params"]["b2"].erase(0);  // drop an entry
  write_json_file(j, path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointShapeError);
  std::remove(path.c_str());
}

TEST_CASE("malformed files raise a parse error") {
  const std::string path = temp_ckpt("garbage");
  {
    std::ofstream out(path);
    out << "this is not json";
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointParseError);
  {
    std::ofstream out(path);
    out << "{\"format_version\": 1}";
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointParseError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/nope.json"), CheckpointParseError);
  std::remove(path.c_str());
}

TEST_CASE("the three error kinds stay distinguishable") {
  // all derive from CheckpointError but not from each other
  CHECK_THROWS_AS(throw CheckpointVersionError("v"), CheckpointError);
  CHECK_THROWS_AS(throw CheckpointShapeError("s"), CheckpointError);
  CHECK_THROWS_AS(throw CheckpointParseError("p"), CheckpointError);
}

}  // TEST_SUITE
