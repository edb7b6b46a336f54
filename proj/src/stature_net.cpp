#include "bedsim/stature_net.hpp"

#include "bedsim/adam.hpp"
#include "bedsim/mesh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace bedsim {

using nlohmann::json;

std::pair<double, double> stature_labels(
    const BodyModel& model, const Eigen::Matrix<double, kNumShape, 1>& beta,
    const GenderFlags& gender) {
  const double h = model.shaped_height(beta, gender);
  const TriMesh mesh{model.shaped_vertices(beta, gender), model.faces()};
  const double m = model.body_mass(mesh_volume(mesh).volume, gender);
  return {h, m};
}

StatureDataset generate_stature_dataset(const BodyModel& model, int n,
                                        uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("stature dataset: n must be > 0");
  StatureDataset data;
  data.seed = seed;
  data.samples.reserve(n);
  Rng rng(seed);
  const GenderFlags genders[3] = {kMale, kFemale, kNeutral};
  for (int i = 0; i < n; ++i) {
    StatureSample s;
    Eigen::Matrix<double, kNumShape, 1> beta;
    for (int k = 0; k < kNumShape; ++k) beta[k] = rng.uniform(-3.0, 3.0);
    const GenderFlags g = genders[rng.below(3)];
    s.input.head<kNumShape>() = beta;
    s.input[10] = g[0];
    s.input[11] = g[1];
    std::tie(s.height, s.mass) = stature_labels(model, beta, g);
    data.samples.push_back(std::move(s));
  }
  return data;
}

double stature_loss(double h, double m, double h_hat, double m_hat,
                    double sigma_h, double sigma_m) {
  if (!(sigma_h > 0.0) || !(sigma_m > 0.0))
    throw std::invalid_argument("stature_loss: sigmas must be > 0");
  return std::abs(h - h_hat) / sigma_h + std::abs(m - m_hat) / sigma_m;
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

StatureNet StatureNet::train(const StatureDataset& data, const TrainConfig& cfg) {
  const int n = static_cast<int>(data.samples.size());
  if (n == 0) throw std::invalid_argument("stature train: empty dataset");
  if (cfg.hidden <= 0 || cfg.epochs <= 0 || cfg.batch <= 0)
    throw std::invalid_argument("stature train: bad config");

  StatureNet net;
  net.seed_ = cfg.seed;

  // Standardization statistics over the training set.
  net.in_mean_.setZero();
  net.out_mean_.setZero();
  for (const auto& s : data.samples) {
    net.in_mean_ += s.input;
    net.out_mean_ += Eigen::Vector2d(s.height, s.mass);
  }
  net.in_mean_ /= n;
  net.out_mean_ /= n;
  Eigen::Matrix<double, 12, 1> in_var = Eigen::Matrix<double, 12, 1>::Zero();
  Eigen::Vector2d out_var = Eigen::Vector2d::Zero();
  for (const auto& s : data.samples) {
    in_var += (s.input - net.in_mean_).cwiseAbs2();
    const Eigen::Vector2d d(s.height - net.out_mean_[0], s.mass - net.out_mean_[1]);
    out_var += d.cwiseAbs2();
  }
  const double denom = std::max(1, n - 1);
  net.in_scale_ = (in_var / denom).cwiseSqrt().cwiseMax(1e-6);
  net.out_scale_ = (out_var / denom).cwiseSqrt().cwiseMax(1e-9);
  net.sigma_h_ = net.out_scale_[0];
  net.sigma_m_ = net.out_scale_[1];

  const int H = cfg.hidden;
  Rng rng(cfg.seed);
  auto init = [&](MatX& w, int rows, int cols) {
    const double a = std::sqrt(6.0 / (rows + cols));
    w.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-a, a);
  };
  init(net.w1_, H, 12);
  init(net.w2_, 2, H);
  net.b1_ = VecX::Zero(H);
  net.b2_ = VecX::Zero(2);

  // Flat parameter vector [w1, b1, w2, b2] for the shared optimizer.
  const int np = H * 12 + H + 2 * H + 2;
  VecX params(np);
  auto pack = [&](VecX& p) {
    int o = 0;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < 12; ++c) p[o++] = net.w1_(r, c);
    for (int r = 0; r < H; ++r) p[o++] = net.b1_[r];
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < H; ++c) p[o++] = net.w2_(r, c);
    for (int r = 0; r < 2; ++r) p[o++] = net.b2_[r];
  };
  auto unpack = [&](const VecX& p) {
    int o = 0;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < 12; ++c) net.w1_(r, c) = p[o++];
    for (int r = 0; r < H; ++r) net.b1_[r] = p[o++];
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < H; ++c) net.w2_(r, c) = p[o++];
    for (int r = 0; r < 2; ++r) net.b2_[r] = p[o++];
  };
  pack(params);

  // Pre-standardized copies of the data.
  std::vector<Eigen::Matrix<double, 12, 1>> xs(n);
  std::vector<Eigen::Vector2d> ys(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = (data.samples[i].input - net.in_mean_).cwiseQuotient(net.in_scale_);
    ys[i] = (Eigen::Vector2d(data.samples[i].height, data.samples[i].mass) -
             net.out_mean_)
                .cwiseQuotient(net.out_scale_);
  }

  Adam opt(np, cfg.lr, cfg.weight_decay);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  net.epoch_loss_.clear();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Seeded Fisher-Yates shuffle.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch) {
      const int end = std::min(n, start + cfg.batch);
      const int bs = end - start;
      MatX gw1 = MatX::Zero(H, 12);
      VecX gb1 = VecX::Zero(H);
      MatX gw2 = MatX::Zero(2, H);
      VecX gb2 = VecX::Zero(2);
      for (int bi = start; bi < end; ++bi) {
        const auto& x = xs[order[bi]];
        const auto& y = ys[order[bi]];
        const VecX a1 = net.w1_ * x + net.b1_;
        const VecX h1 = a1.array().tanh().matrix();
        const Eigen::Vector2d out = net.w2_ * h1 + net.b2_;
        // Normalized-L1 loss; out_scale equals (sigma_h, sigma_m), so the
        // standardized-space L1 below is exactly the label loss.
        epoch_sum += std::abs(out[0] - y[0]) + std::abs(out[1] - y[1]);
        const Eigen::Vector2d dout(sign(out[0] - y[0]), sign(out[1] - y[1]));
        gw2 += dout * h1.transpose();
        gb2 += dout;
        const VecX dh1 = net.w2_.transpose() * dout;
        const VecX da1 =
            dh1.cwiseProduct((1.0 - h1.array().square()).matrix());
        gw1 += da1 * x.transpose();
        gb1 += da1;
      }
      const double inv = 1.0 / bs;
      VecX grad(np);
      {
        int o = 0;
        for (int r = 0; r < H; ++r)
          for (int c = 0; c < 12; ++c) grad[o++] = gw1(r, c) * inv;
        for (int r = 0; r < H; ++r) grad[o++] = gb1[r] * inv;
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < H; ++c) grad[o++] = gw2(r, c) * inv;
        for (int r = 0; r < 2; ++r) grad[o++] = gb2[r] * inv;
      }
      opt.step(params, grad);
      unpack(params);
    }
    const double epoch_loss = epoch_sum / n;
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("stature train: loss diverged at epoch " +
                               std::to_string(epoch));
    net.epoch_loss_.push_back(epoch_loss);
  }
  return net;
}

Eigen::Vector2d StatureNet::forward_std(
    const Eigen::Matrix<double, 12, 1>& x_std) const {
  const VecX h1 = (w1_ * x_std + b1_).array().tanh().matrix();
  return w2_ * h1 + b2_;
}

std::pair<double, double> StatureNet::predict(
    const Eigen::Matrix<double, 12, 1>& input) const {
  const Eigen::Matrix<double, 12, 1> x =
      (input - in_mean_).cwiseQuotient(in_scale_);
  const Eigen::Vector2d y = forward_std(x).cwiseProduct(out_scale_) + out_mean_;
  return {y[0], y[1]};
}

std::pair<double, double> StatureNet::predict(
    const Eigen::Matrix<double, kNumShape, 1>& beta,
    const GenderFlags& gender) const {
  Eigen::Matrix<double, 12, 1> input;
  input.head<kNumShape>() = beta;
  input[10] = gender[0];
  input[11] = gender[1];
  return predict(input);
}

Eigen::Matrix<double, 2, 12> StatureNet::input_jacobian(
    const Eigen::Matrix<double, 12, 1>& input) const {
  const Eigen::Matrix<double, 12, 1> x =
      (input - in_mean_).cwiseQuotient(in_scale_);
  const VecX a1 = w1_ * x + b1_;
  const VecX h1 = a1.array().tanh().matrix();
  const VecX dact = (1.0 - h1.array().square()).matrix();
  Eigen::Matrix<double, 2, 12> jac =
      out_scale_.asDiagonal() * w2_ * dact.asDiagonal() * w1_;
  for (int c = 0; c < 12; ++c) jac.col(c) /= in_scale_[c];
  return jac;
}

void StatureNet::save_json(const std::string& path) const {
  json j;
  j["format"] = "bedsim-stature-v1";
  j["hidden"] = hidden();
  j["seed"] = seed_;
  j["sigma_h"] = sigma_h_;
  j["sigma_m"] = sigma_m_;
  auto dump_mat = [](const MatX& m) {
    std::vector<double> v;
    v.reserve(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
  };
  auto dump_vec = [](const VecX& x) {
    return std::vector<double>(x.data(), x.data() + x.size());
  };
  j["w1"] = dump_mat(w1_);
  j["b1"] = dump_vec(b1_);
  j["w2"] = dump_mat(w2_);
  j["b2"] = dump_vec(b2_);
  j["in_mean"] = std::vector<double>(in_mean_.data(), in_mean_.data() + 12);
  j["in_scale"] = std::vector<double>(in_scale_.data(), in_scale_.data() + 12);
  j["out_mean"] = std::vector<double>(out_mean_.data(), out_mean_.data() + 2);
  j["out_scale"] = std::vector<double>(out_scale_.data(), out_scale_.data() + 2);
  j["epoch_loss"] = epoch_loss_;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

StatureNet StatureNet::load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "bedsim-stature-v1")
    throw std::runtime_error("unrecognized stature model file: " + path);
  StatureNet net;
  const int H = j.at("hidden").get<int>();
  net.seed_ = j.at("seed").get<uint64_t>();
  net.sigma_h_ = j.at("sigma_h").get<double>();
  net.sigma_m_ = j.at("sigma_m").get<double>();
  auto load_mat = [&](const char* key, int rows, int cols) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<int>(v.size()) != rows * cols)
      throw std::runtime_error("stature model: bad matrix size");
    MatX m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
    return m;
  };
  auto load_vec = [&](const char* key, int nvals) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<int>(v.size()) != nvals)
      throw std::runtime_error("stature model: bad vector size");
    return Eigen::Map<const VecX>(v.data(), nvals).eval();
  };
  net.w1_ = load_mat("w1", H, 12);
  net.b1_ = load_vec("b1", H);
  net.w2_ = load_mat("w2", 2, H);
  net.b2_ = load_vec("b2", 2);
  net.in_mean_ = load_vec("in_mean", 12);
  net.in_scale_ = load_vec("in_scale", 12);
  net.out_mean_ = load_vec("out_mean", 2);
  net.out_scale_ = load_vec("out_scale", 2);
  net.epoch_loss_ = j.at("epoch_loss").get<std::vector<double>>();
  return net;
}

}  // namespace bedsim
