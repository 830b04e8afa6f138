#include "safelink/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace safelink {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'N', 'K', 'M', 'D', 'L', '1'};

void write_bytes(std::ostream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void write_i64(std::ostream& out, std::int64_t v) { write_bytes(out, &v, 8); }
void write_u64(std::ostream& out, std::uint64_t v) { write_bytes(out, &v, 8); }
void write_f64(std::ostream& out, double v) { write_bytes(out, &v, 8); }

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_i64(out, m.rows());
  write_i64(out, m.cols());
  write_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void read_bytes(std::istream& in, void* data, std::size_t size) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (in.gcount() != static_cast<std::streamsize>(size))
    throw std::runtime_error("model archive is truncated");
}

std::int64_t read_i64(std::istream& in) {
  std::int64_t v;
  read_bytes(in, &v, 8);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v;
  read_bytes(in, &v, 8);
  return v;
}
double read_f64(std::istream& in) {
  double v;
  read_bytes(in, &v, 8);
  return v;
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  const std::int64_t rows = read_i64(in);
  const std::int64_t cols = read_i64(in);
  if (rows < 0 || cols < 0 || rows > 1'000'000 || cols > 1'000'000)
    throw std::runtime_error("model archive has an implausible matrix shape");
  Eigen::MatrixXd m(rows, cols);
  read_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  return m;
}

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open model archive for writing: " +
                             path.string());
  write_bytes(out, kMagic, sizeof(kMagic));

  write_i64(out, model.config.input_dim);
  write_i64(out, model.config.groups);
  write_i64(out, model.config.nodes_per_group);
  write_f64(out, model.config.ridge);
  write_f64(out, model.config.activation_scale);
  write_f64(out, model.config.init_range);
  write_f64(out, model.config.input_scale);
  write_u64(out, model.config.seed);

  write_f64(out, model.cost.c1);
  write_f64(out, model.cost.c2);

  write_matrix(out, model.layer.weights);
  write_matrix(out, model.layer.biases);
  write_matrix(out, model.w_b);
  write_matrix(out, model.k_cache);
  write_matrix(out, model.gram);
  write_matrix(out, model.q_cache);
  write_matrix(out, model.unsafe_feature_sum);

  write_i64(out, model.sample_count);
  write_i64(out, model.updates_since_rebase);

  out.flush();
  if (!out)
    throw std::runtime_error("failed writing model archive: " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open model archive: " + path.string());
  char magic[8];
  read_bytes(in, magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a model archive: " + path.string());

  TrainedModel model;
  model.config.input_dim = static_cast<int>(read_i64(in));
  model.config.groups = static_cast<int>(read_i64(in));
  model.config.nodes_per_group = static_cast<int>(read_i64(in));
  model.config.ridge = read_f64(in);
  model.config.activation_scale = read_f64(in);
  model.config.init_range = read_f64(in);
  model.config.input_scale = read_f64(in);
  model.config.seed = read_u64(in);
  model.config.validate();

  model.cost.c1 = read_f64(in);
  model.cost.c2 = read_f64(in);
  model.cost.validate();

  const Eigen::MatrixXd weights = read_matrix(in);
  const Eigen::MatrixXd biases = read_matrix(in);
  const Eigen::MatrixXd w_b = read_matrix(in);
  const Eigen::MatrixXd k_cache = read_matrix(in);
  const Eigen::MatrixXd gram = read_matrix(in);
  const Eigen::MatrixXd q_cache = read_matrix(in);
  const Eigen::MatrixXd unsafe_sum = read_matrix(in);

  model.sample_count = read_i64(in);
  model.updates_since_rebase = read_i64(in);

  const int d = model.config.extended_dim();
  const int m = model.config.enhancement_nodes();
  if (weights.rows() != model.config.input_dim || weights.cols() != m ||
      biases.rows() != 1 || biases.cols() != m || w_b.rows() != d ||
      w_b.cols() != 2 || k_cache.rows() != d || k_cache.cols() != d ||
      gram.rows() != d || gram.cols() != d || q_cache.rows() != d ||
      q_cache.cols() != 2 || unsafe_sum.rows() != d || unsafe_sum.cols() != 1)
    throw std::runtime_error("model archive fields have inconsistent shapes");

  model.layer.weights = weights;
  model.layer.biases = biases.row(0);
  model.w_b = w_b;
  model.k_cache = k_cache;
  model.gram = gram;
  model.q_cache = q_cache;
  model.unsafe_feature_sum = unsafe_sum.col(0);
  return model;
}

}  // namespace safelink
