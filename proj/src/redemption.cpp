#include "gantrust/redemption.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace gantrust {

namespace {

void check_vectors(const std::vector<std::vector<double>>& dataset, int dim,
                   int min_size) {
  if (static_cast<int>(dataset.size()) < min_size)
    throw DataError("dataset holds " + std::to_string(dataset.size()) +
                    " vectors, need at least " + std::to_string(min_size));
  for (const auto& x : dataset) {
    if (static_cast<int>(x.size()) != dim)
      throw ShapeError("attack vector length " + std::to_string(x.size()) +
                       ", expected " + std::to_string(dim));
    for (double v : x)
      if (!(v >= 0.0 && v <= 1.0))
        throw DataError("attack probability outside [0,1]: " + std::to_string(v));
  }
}

Matrix rows_at(const std::vector<std::vector<double>>& dataset,
               const std::vector<int>& order, int start, int count) {
  const int dim = static_cast<int>(dataset[0].size());
  Matrix m(count, dim);
  for (int r = 0; r < count; ++r) {
    const auto& src = dataset[static_cast<size_t>(order[start + r])];
    for (int c = 0; c < dim; ++c) m(r, c) = src[static_cast<size_t>(c)];
  }
  return m;
}

Matrix constant_like(const Matrix& m, double v) {
  Matrix out(m.rows, m.cols);
  std::fill(out.data.begin(), out.data.end(), v);
  return out;
}

void check_finite(double v, const char* what, int epoch, int batch) {
  if (!std::isfinite(v))
    throw NumericError(std::string(what) + " diverged at epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch));
}

}  // namespace

std::vector<double> build_attack_vector(const EvidenceLog& log, int seq_len,
                                        int window) {
  if (window < 1 || seq_len < window)
    throw DomainError("need 1 <= window <= seq_len");
  if (log.size() < seq_len)
    throw EvidenceError("need " + std::to_string(seq_len) +
                        " observations, have " + std::to_string(log.size()));
  const int start = log.size() - seq_len;
  std::vector<int> fused(static_cast<size_t>(seq_len));
  for (int i = 0; i < seq_len; ++i) {
    const int k = start + i;
    fused[static_cast<size_t>(i)] =
        (log.drop(k) || log.delay(k) || log.tamper(k)) ? 1 : 0;
  }
  std::vector<double> vec(static_cast<size_t>(seq_len - window + 1));
  for (size_t j = 0; j < vec.size(); ++j) {
    int ones = 0;
    for (int i = 0; i < window; ++i) ones += fused[j + static_cast<size_t>(i)];
    vec[j] = static_cast<double>(ones) / window;
  }
  return vec;
}

RedemptionModel make_redemption(const RedemptionConfig& cfg, Rng& rng) {
  if (cfg.vec_dim() < 2 || cfg.batch_size < 2)
    throw DomainError("redemption config needs vec_dim >= 2, batch >= 2");
  const int d = cfg.vec_dim();
  std::vector<LayerSpec> gen = {
      {d, 16, Act::leaky_relu, true},  {16, 8, Act::leaky_relu, true},
      {8, 4, Act::leaky_relu, true},   {4, 8, Act::leaky_relu, true},
      {8, 16, Act::leaky_relu, true},  {16, d, Act::sigmoid, false},
  };
  std::vector<LayerSpec> disc = {
      {d, 16, Act::leaky_relu, false},
      {16, 8, Act::leaky_relu, false},
      {8, 1, Act::sigmoid, false},
  };
  AdamState opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.eps = cfg.adam_eps;
  return RedemptionModel{cfg, DenseNetwork(gen, rng, cfg.init_stddev),
                         DenseNetwork(disc, rng, cfg.init_stddev), opt, opt};
}

RedemptionTrainStats train_redemption(RedemptionModel& model,
                                      const std::vector<std::vector<double>>& dataset,
                                      int epochs, Rng& rng) {
  const RedemptionConfig& cfg = model.cfg;
  const int d = cfg.vec_dim();
  check_vectors(dataset, d, cfg.batch_size);
  if (epochs < 1) throw DomainError("epochs must be >= 1");

  const int n = static_cast<int>(dataset.size());
  const int batches = n / cfg.batch_size;
  const int b_sz = cfg.batch_size;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> extra(static_cast<size_t>(b_sz));

  RedemptionTrainStats stats;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (int b = 0; b < batches; ++b) {
      const Matrix x = rows_at(dataset, order, b * b_sz, b_sz);

      // mask: last digit replaced by one uniform draw per sample
      Matrix masked = x;
      for (int r = 0; r < b_sz; ++r) masked(r, d - 1) = rng.uniform01();

      // second real batch for the discriminator
      for (int r = 0; r < b_sz; ++r)
        extra[static_cast<size_t>(r)] = static_cast<int>(rng.uniform_int(dataset.size()));
      const Matrix x2 = rows_at(dataset, extra, 0, b_sz);

      // restored sample: masked input with the generator's last digit
      auto restore = [&](const Matrix& g) {
        Matrix res = masked;
        for (int r = 0; r < b_sz; ++r) res(r, d - 1) = g(r, d - 1);
        return res;
      };

      // discriminator: fresh reals vs restored fakes
      {
        const Matrix g = model.generator.forward(masked, true);
        Matrix p = model.discriminator.forward(x2, true);
        LossValue real = least_squares(p, constant_like(p, 1.0));
        model.discriminator.backward(real.grad);
        p = model.discriminator.forward(restore(g), true);
        LossValue fake = least_squares(p, constant_like(p, 0.0));
        model.discriminator.backward(fake.grad);
        stats.disc_loss = real.value + fake.value;
        check_finite(stats.disc_loss, "discriminator loss", epoch, b);
        model.discriminator.adam_step(model.opt_disc);
      }

      // generator: fool the discriminator through the restored digit while
      // keeping the unmasked prefix faithful
      {
        const Matrix g = model.generator.forward(masked, true);
        const Matrix p = model.discriminator.forward(restore(g), true);
        LossValue adv = least_squares(p, constant_like(p, 1.0));
        const Matrix d_res = model.discriminator.backward(adv.grad);

        Matrix g_pre(b_sz, d - 1), x_pre(b_sz, d - 1);
        for (int r = 0; r < b_sz; ++r) {
          for (int c = 0; c + 1 < d; ++c) {
            g_pre(r, c) = g(r, c);
            x_pre(r, c) = x(r, c);
          }
        }
        LossValue fid = mean_abs(g_pre, x_pre);
        Matrix d_g(b_sz, d);
        for (int r = 0; r < b_sz; ++r) {
          for (int c = 0; c + 1 < d; ++c) d_g(r, c) = 0.5 * fid.grad(r, c);
          d_g(r, d - 1) = d_res(r, d - 1);  // adversarial path: last digit only
        }
        model.generator.backward(d_g);
        stats.gen_loss = adv.value + 0.5 * fid.value;
        check_finite(stats.gen_loss, "generator loss", epoch, b);
        model.generator.adam_step(model.opt_gen);
        model.discriminator.zero_grads();
      }
    }
  }
  return stats;
}

double restore_last_digit(const RedemptionModel& model,
                          const std::vector<double>& attack_vec, double mask_value) {
  const int d = model.cfg.vec_dim();
  check_vectors({attack_vec}, d, 1);
  if (!(mask_value >= 0.0 && mask_value <= 1.0))
    throw DomainError("mask value outside [0,1]");
  Matrix in(1, d);
  std::copy(attack_vec.begin(), attack_vec.end(), in.data.begin());
  in(0, d - 1) = mask_value;
  auto& m = const_cast<RedemptionModel&>(model);
  const Matrix g = m.generator.forward(in, false);
  return g(0, d - 1);
}

double predict_cooperation(const RedemptionModel& model,
                           const std::vector<double>& attack_vec, Rng& rng) {
  return 1.0 - restore_last_digit(model, attack_vec, rng.uniform01());
}

void RedemptionModel::save(std::ostream& out) const {
  out << "redemption 1\n"
      << cfg.seq_len << ' ' << cfg.window << ' ' << cfg.batch_size << ' '
      << cfg.initial_epochs << ' ' << cfg.update_epochs << '\n';
  out << std::hexfloat << cfg.lr << ' ' << cfg.beta1 << ' ' << cfg.beta2 << ' '
      << cfg.adam_eps << ' ' << cfg.init_stddev << '\n'
      << std::defaultfloat;
  generator.save(out);
  discriminator.save(out);
}

RedemptionModel RedemptionModel::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "redemption" || version != 1)
    throw ParseError("bad redemption header");
  RedemptionConfig cfg;
  std::string lr, b1, b2, eps, sd;
  if (!(in >> cfg.seq_len >> cfg.window >> cfg.batch_size >> cfg.initial_epochs >>
        cfg.update_epochs >> lr >> b1 >> b2 >> eps >> sd))
    throw ParseError("bad redemption config");
  cfg.lr = parse_double(lr);
  cfg.beta1 = parse_double(b1);
  cfg.beta2 = parse_double(b2);
  cfg.adam_eps = parse_double(eps);
  cfg.init_stddev = parse_double(sd);
  AdamState opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.eps = cfg.adam_eps;
  return RedemptionModel{cfg, DenseNetwork::load(in), DenseNetwork::load(in), opt,
                         opt};
}

}  // namespace gantrust
