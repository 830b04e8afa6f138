#include "doctest.h"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "safelink/incremental.hpp"
#include "safelink/model_io.hpp"
#include "safelink/rng.hpp"

using namespace safelink;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::vector<char>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

TrainedModel sample_model() {
  RvflConfig cfg;
  cfg.groups = 4;
  cfg.nodes_per_group = 5;
  cfg.seed = 17;
  const LabeledSamples offline = oracles::random_samples(90, 2, 12.0, 3);
  TrainedModel model = train(offline, cfg, CostMatrix{2.5, 1.0});
  UpdateBatch batch;
  batch.samples = oracles::random_samples(10, 2, 12.0, 4, 1.0);
  return append_samples(model, batch);
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("a saved model loads back field for field") {
  const TrainedModel model = sample_model();
  const auto path = temp_file("safelink_roundtrip.bin");
  save_model(model, path);
  const TrainedModel loaded = load_model(path);

  CHECK(loaded.config.input_dim == model.config.input_dim);
  CHECK(loaded.config.groups == model.config.groups);
  CHECK(loaded.config.nodes_per_group == model.config.nodes_per_group);
  CHECK(loaded.config.ridge == model.config.ridge);
  CHECK(loaded.config.activation_scale == model.config.activation_scale);
  CHECK(loaded.config.init_range == model.config.init_range);
  CHECK(loaded.config.input_scale == model.config.input_scale);
  CHECK(loaded.config.seed == model.config.seed);
  CHECK(loaded.cost.c1 == model.cost.c1);
  CHECK(loaded.cost.c2 == model.cost.c2);
  CHECK(max_abs_diff(loaded.layer.weights, model.layer.weights) == 0.0);
  CHECK(max_abs_diff(loaded.layer.biases, model.layer.biases) == 0.0);
  CHECK(max_abs_diff(loaded.w_b, model.w_b) == 0.0);
  CHECK(max_abs_diff(loaded.k_cache, model.k_cache) == 0.0);
  CHECK(max_abs_diff(loaded.gram, model.gram) == 0.0);
  CHECK(max_abs_diff(loaded.q_cache, model.q_cache) == 0.0);
  CHECK(max_abs_diff(loaded.unsafe_feature_sum, model.unsafe_feature_sum) ==
        0.0);
  CHECK(loaded.sample_count == 100);
  CHECK(loaded.updates_since_rebase == 1);
  std::filesystem::remove(path);
}

TEST_CASE("saving a loaded model reproduces the bytes") {
  const TrainedModel model = sample_model();
  const auto first = temp_file("safelink_bytes_a.bin");
  const auto second = temp_file("safelink_bytes_b.bin");
  save_model(model, first);
  save_model(load_model(first), second);
  CHECK(read_all(first) == read_all(second));
  std::filesystem::remove(first);
  std::filesystem::remove(second);
}

TEST_CASE("predictions survive the round trip bit for bit") {
  const TrainedModel model = sample_model();
  const auto path = temp_file("safelink_predict.bin");
  save_model(model, path);
  const TrainedModel loaded = load_model(path);

  std::mt19937_64 gen(5);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d x(uniform(gen, -15.0, 15.0),
                            uniform(gen, -15.0, 15.0));
    CHECK(cbf_value(loaded, x) == cbf_value(model, x));
  }
  std::filesystem::remove(path);
}

TEST_CASE("loading rejects missing and malformed files") {
  CHECK_THROWS_AS(load_model(temp_file("safelink_never_written.bin")),
                  std::runtime_error);

  const auto junk = temp_file("safelink_junk.bin");
  write_all(junk, {'n', 'o', 't', 'a', 'm', 'o', 'd', 'e', 'l'});
  CHECK_THROWS_WITH_AS(load_model(junk),
                       doctest::Contains("not a model archive"),
                       std::runtime_error);
  std::filesystem::remove(junk);
}

TEST_CASE("loading rejects a truncated archive") {
  const TrainedModel model = sample_model();
  const auto path = temp_file("safelink_truncated.bin");
  save_model(model, path);
  std::vector<char> bytes = read_all(path);
  bytes.resize(bytes.size() / 2);
  write_all(path, bytes);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"),
                       std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("loading rejects an implausible matrix shape") {
  const TrainedModel model = sample_model();
  const auto path = temp_file("safelink_implausible.bin");
  save_model(model, path);
  std::vector<char> bytes = read_all(path);
  // First matrix header sits right after the scalar config and cost block.
  const std::size_t offset = 8 + 8 * 8 + 2 * 8;
  const std::int64_t rows = 2'000'000;
  std::memcpy(bytes.data() + offset, &rows, sizeof(rows));
  write_all(path, bytes);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("implausible"),
                       std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("loading rejects shapes that disagree with the config") {
  const TrainedModel model = sample_model();
  const auto path = temp_file("safelink_inconsistent.bin");
  save_model(model, path);
  std::vector<char> bytes = read_all(path);
  // Bump the group count; every stored matrix is now the wrong size.
  const std::size_t offset = 8 + 8;
  const std::int64_t groups = 5;
  std::memcpy(bytes.data() + offset, &groups, sizeof(groups));
  write_all(path, bytes);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("inconsistent"),
                       std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("loading validates the stored hyperparameters") {
  const TrainedModel model = sample_model();
  const auto path = temp_file("safelink_badridge.bin");
  save_model(model, path);
  std::vector<char> bytes = read_all(path);
  const std::size_t offset = 8 + 3 * 8;  // ridge
  const double ridge = -1.0;
  std::memcpy(bytes.data() + offset, &ridge, sizeof(ridge));
  write_all(path, bytes);
  CHECK_THROWS(load_model(path));
  std::filesystem::remove(path);
}

TEST_CASE("saving to an unwritable path reports the failure") {
  const TrainedModel model = sample_model();
  CHECK_THROWS_AS(save_model(model, std::filesystem::temp_directory_path()),
                  std::runtime_error);
}

}  // TEST_SUITE
