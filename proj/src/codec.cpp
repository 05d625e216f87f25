#include "gantrust/codec.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace gantrust {

namespace {

void check_dataset(const std::vector<std::vector<double>>& dataset, int dim,
                   int min_size) {
  if (static_cast<int>(dataset.size()) < min_size)
    throw DataError("dataset holds " + std::to_string(dataset.size()) +
                    " vectors, need at least " + std::to_string(min_size));
  for (const auto& x : dataset) {
    if (static_cast<int>(x.size()) != dim)
      throw ShapeError("trust vector length " + std::to_string(x.size()) +
                       ", expected " + std::to_string(dim));
    for (double v : x)
      if (!(v >= 0.0 && v <= 1.0))
        throw DataError("trust vector entry outside [0,1]: " + std::to_string(v));
  }
}

Matrix batch_rows(const std::vector<std::vector<double>>& dataset,
                  const std::vector<int>& order, int start, int count) {
  const int dim = static_cast<int>(dataset[0].size());
  Matrix m(count, dim);
  for (int r = 0; r < count; ++r) {
    const auto& src = dataset[static_cast<size_t>(order[start + r])];
    for (int c = 0; c < dim; ++c) m(r, c) = src[static_cast<size_t>(c)];
  }
  return m;
}

Matrix condition_batch(const std::vector<std::vector<double>>& dataset, int count,
                       Rng& rng) {
  const int dim = static_cast<int>(dataset[0].size());
  Matrix m(count, dim - 1);
  for (int r = 0; r < count; ++r) {
    const auto& src = dataset[rng.uniform_int(dataset.size())];
    for (int c = 0; c + 1 < dim; ++c)
      m(r, c) = src[static_cast<size_t>(c + 1)] - src[static_cast<size_t>(c)];
  }
  return m;
}

Matrix latent_batch(int count, int dim, Rng& rng) {
  Matrix m(count, dim);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

Matrix constant_like(const Matrix& m, double v) {
  Matrix out(m.rows, m.cols);
  std::fill(out.data.begin(), out.data.end(), v);
  return out;
}

Matrix first_cols(const Matrix& m, int n) {
  Matrix out(m.rows, n);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < n; ++c) out(r, c) = m(r, c);
  return out;
}

void scale_in_place(Matrix& m, double s) {
  for (double& v : m.data) v *= s;
}

void check_finite(double v, const char* what, int epoch, int batch) {
  if (!std::isfinite(v))
    throw NumericError(std::string(what) + " diverged at epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch));
}

// enough momentum-0.9 blends that the post-reset zero bias decays below 1e-7
constexpr int kCalibrationPasses = 5;

}  // namespace

CodecModel make_codec(const CodecConfig& cfg, Rng& rng) {
  if (cfg.data_dim < 2 || cfg.latent_dim < 1 || cfg.batch_size < 2)
    throw DomainError("codec config needs data_dim >= 2, latent_dim >= 1, batch >= 2");
  if (cfg.gen_h1 < 1 || cfg.gen_h2 < 1 || cfg.gen_h3 < 1)
    throw DomainError("codec generator widths must be positive");
  const int cd = cfg.condition_dim();
  std::vector<LayerSpec> enc = {
      {cfg.data_dim, cfg.gen_h1, Act::leaky_relu, true},
      {cfg.gen_h1, cfg.gen_h2, Act::leaky_relu, true},
      {cfg.gen_h2, cfg.gen_h3, Act::leaky_relu, true},
      {cfg.gen_h3, cfg.latent_dim, Act::tanh_act, false},
  };
  std::vector<LayerSpec> dec = {
      {cfg.latent_dim + cd, cfg.gen_h1, Act::leaky_relu, true},
      {cfg.gen_h1, cfg.gen_h2, Act::leaky_relu, true},
      {cfg.gen_h2, cfg.gen_h3, Act::leaky_relu, true},
      {cfg.gen_h3, cfg.data_dim, Act::sigmoid, false},
  };
  std::vector<LayerSpec> dl = {
      {cfg.latent_dim, 32, Act::leaky_relu, false},
      {32, 16, Act::leaky_relu, false},
      {16, 8, Act::leaky_relu, false},
      {8, 1, Act::sigmoid, false},
  };
  std::vector<LayerSpec> ds = {
      {cfg.data_dim + cd, 32, Act::leaky_relu, false},
      {32, 16, Act::leaky_relu, false},
      {16, 8, Act::leaky_relu, false},
      {8, 1, Act::sigmoid, false},
  };
  AdamState opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.eps = cfg.adam_eps;
  CodecModel m{cfg,
               DenseNetwork(enc, rng, cfg.init_stddev),
               DenseNetwork(dec, rng, cfg.init_stddev),
               DenseNetwork(dl, rng, cfg.init_stddev),
               DenseNetwork(ds, rng, cfg.init_stddev),
               opt,
               opt,
               opt,
               opt};
  return m;
}

std::vector<double> condition_of(const std::vector<double>& x) {
  if (x.size() < 2) throw ShapeError("trust vector too short for conditions");
  std::vector<double> c(x.size() - 1);
  for (size_t k = 0; k + 1 < x.size(); ++k) c[k] = x[k + 1] - x[k];
  return c;
}

CodecTrainStats train_codec(CodecModel& model,
                            const std::vector<std::vector<double>>& dataset,
                            int epochs, Rng& rng) {
  const CodecConfig& cfg = model.cfg;
  check_dataset(dataset, cfg.data_dim, cfg.batch_size);
  if (epochs < 1) throw DomainError("epochs must be >= 1");

  const int n = static_cast<int>(dataset.size());
  const int batches = n / cfg.batch_size;
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  CodecTrainStats stats;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (int b = 0; b < batches; ++b) {
      const Matrix x = batch_rows(dataset, order, b * cfg.batch_size, cfg.batch_size);
      // generation draws conditions from random samples; the reconstruction
      // path and the discriminator's real pair use each row's own deltas,
      // matching what scoring feeds the decoder
      const Matrix c = condition_batch(dataset, cfg.batch_size, rng);
      Matrix cm(cfg.batch_size, cfg.condition_dim());
      for (int r = 0; r < cfg.batch_size; ++r)
        for (int k = 0; k + 1 < cfg.data_dim; ++k) cm(r, k) = x(r, k + 1) - x(r, k);
      const Matrix z = latent_batch(cfg.batch_size, cfg.latent_dim, rng);

      // latent discriminator: real latents vs encoded samples
      {
        const Matrix en_x = model.encoder.forward(x, true);
        Matrix p = model.d_latent.forward(z, true);
        LossValue real = least_squares(p, constant_like(p, 1.0));
        model.d_latent.backward(real.grad);
        p = model.d_latent.forward(en_x, true);
        LossValue fake = least_squares(p, constant_like(p, 0.0));
        model.d_latent.backward(fake.grad);
        stats.d_latent_loss = real.value + fake.value;
        check_finite(stats.d_latent_loss, "latent discriminator loss", epoch, b);
        model.d_latent.adam_step(model.opt_d_latent);
      }

      // sample discriminator: real (x, own c) vs generated (De(z|c), c)
      {
        const Matrix de_z = model.decoder.forward(hconcat(z, c), true);
        Matrix p = model.d_sample.forward(hconcat(x, cm), true);
        LossValue real = least_squares(p, constant_like(p, 1.0));
        model.d_sample.backward(real.grad);
        p = model.d_sample.forward(hconcat(de_z, c), true);
        LossValue fake = least_squares(p, constant_like(p, 0.0));
        model.d_sample.backward(fake.grad);
        stats.d_sample_loss = real.value + fake.value;
        check_finite(stats.d_sample_loss, "sample discriminator loss", epoch, b);
        model.d_sample.adam_step(model.opt_d_sample);
      }

      // encoder: fool the latent discriminator + encoding-cycle fidelity
      {
        const Matrix en_x = model.encoder.forward(x, true);
        const Matrix p = model.d_latent.forward(en_x, true);
        LossValue adv = least_squares(p, constant_like(p, 1.0));
        model.encoder.backward(model.d_latent.backward(adv.grad));

        const Matrix de_z = model.decoder.forward(hconcat(z, c), true);
        const Matrix en_de = model.encoder.forward(de_z, true);
        LossValue cyc = mean_abs(en_de, z);
        scale_in_place(cyc.grad, 0.5);
        model.encoder.backward(cyc.grad);

        stats.encoder_loss = adv.value + 0.5 * cyc.value;
        check_finite(stats.encoder_loss, "encoder loss", epoch, b);
        model.encoder.adam_step(model.opt_encoder);
        model.d_latent.zero_grads();  // borrowed for backprop only
      }

      // decoder: fool the sample discriminator + reconstruction fidelity
      {
        const Matrix de_z = model.decoder.forward(hconcat(z, c), true);
        const Matrix p = model.d_sample.forward(hconcat(de_z, c), true);
        LossValue adv = least_squares(p, constant_like(p, 1.0));
        const Matrix d_in = model.d_sample.backward(adv.grad);
        model.decoder.backward(first_cols(d_in, cfg.data_dim));

        const Matrix en_x = model.encoder.forward(x, true);
        const Matrix de_en = model.decoder.forward(hconcat(en_x, cm), true);
        LossValue rec = mean_abs(de_en, x);
        scale_in_place(rec.grad, 0.5);
        model.decoder.backward(rec.grad);

        stats.decoder_loss = adv.value + 0.5 * rec.value;
        check_finite(stats.decoder_loss, "decoder loss", epoch, b);
        model.decoder.adam_step(model.opt_decoder);
        model.d_sample.zero_grads();
        model.encoder.zero_grads();
      }
    }
  }

  // Batch-norm running statistics accumulated above mostly describe generated
  // batches (decoder fed (z,c), encoder fed decoded samples), while scoring
  // runs x -> En(x) -> De(En(x)|condition_of(x)). Recalibrate the generator
  // stats on that scoring path so inference normalizes the data it will see.
  model.encoder.reset_running_stats();
  model.decoder.reset_running_stats();
  for (int pass = 0; pass < kCalibrationPasses; ++pass) {
    rng.shuffle(order);
    for (int b = 0; b < batches; ++b) {
      const Matrix x = batch_rows(dataset, order, b * cfg.batch_size, cfg.batch_size);
      Matrix c(cfg.batch_size, cfg.condition_dim());
      for (int r = 0; r < cfg.batch_size; ++r)
        for (int k = 0; k + 1 < cfg.data_dim; ++k) c(r, k) = x(r, k + 1) - x(r, k);
      const Matrix en_x = model.encoder.forward(x, true);
      model.decoder.forward(hconcat(en_x, c), true);
    }
  }
  return stats;
}

double reconstruction_loss(const CodecModel& model, const std::vector<double>& x) {
  check_dataset({x}, model.cfg.data_dim, 1);
  Matrix in(1, model.cfg.data_dim);
  std::copy(x.begin(), x.end(), in.data.begin());
  const std::vector<double> c = condition_of(x);
  Matrix cm(1, model.cfg.condition_dim());
  std::copy(c.begin(), c.end(), cm.data.begin());

  // inference mode keeps the model const in behavior; cast confines the
  // running-stat API to training
  auto& m = const_cast<CodecModel&>(model);
  const Matrix en = m.encoder.forward(in, false);
  const Matrix out = m.decoder.forward(hconcat(en, cm), false);
  double s = 0.0;
  for (int k = 0; k < model.cfg.data_dim; ++k) s += std::fabs(out(0, k) - in(0, k));
  return s / model.cfg.data_dim;
}

ThresholdPair thresholds_from_losses(std::vector<double> losses) {
  if (losses.empty()) throw DataError("no losses to derive thresholds from");
  for (double v : losses)
    if (!std::isfinite(v) || v < 0.0)
      throw DataError("loss values must be finite and nonnegative");
  std::sort(losses.begin(), losses.end(), std::greater<double>());
  const int n = static_cast<int>(losses.size());
  const int drop = n / 10;  // floor(0.1 * n)
  ThresholdPair t;
  t.tr2 = losses[0];
  t.tr1 = losses[static_cast<size_t>(drop == n ? n - 1 : drop)];
  return t;
}

ThresholdPair compute_thresholds(const CodecModel& model,
                                 const std::vector<std::vector<double>>& dataset) {
  check_dataset(dataset, model.cfg.data_dim, 1);
  std::vector<double> losses;
  losses.reserve(dataset.size());
  for (const auto& x : dataset) losses.push_back(reconstruction_loss(model, x));
  return thresholds_from_losses(std::move(losses));
}

TrustClass classify_loss(double loss, const ThresholdPair& t) {
  if (!std::isfinite(loss)) throw DomainError("non-finite reconstruction loss");
  if (loss < t.tr1) return TrustClass::trusted;
  if (loss < t.tr2) return TrustClass::suspect;
  return TrustClass::malicious;
}

TrustClass classify(const CodecModel& model, const ThresholdPair& t,
                    const std::vector<double>& x) {
  return classify_loss(reconstruction_loss(model, x), t);
}

void CodecModel::save(std::ostream& out) const {
  out << "codec 1\n"
      << cfg.data_dim << ' ' << cfg.latent_dim << ' ' << cfg.batch_size << ' '
      << cfg.initial_epochs << ' ' << cfg.update_epochs << '\n';
  out << std::hexfloat << cfg.lr << ' ' << cfg.beta1 << ' ' << cfg.beta2 << ' '
      << cfg.adam_eps << ' ' << cfg.init_stddev << '\n'
      << std::defaultfloat;
  encoder.save(out);
  decoder.save(out);
  d_latent.save(out);
  d_sample.save(out);
}

CodecModel CodecModel::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "codec" || version != 1)
    throw ParseError("bad codec header");
  CodecConfig cfg;
  std::string lr, b1, b2, eps, sd;
  if (!(in >> cfg.data_dim >> cfg.latent_dim >> cfg.batch_size >>
        cfg.initial_epochs >> cfg.update_epochs >> lr >> b1 >> b2 >> eps >> sd))
    throw ParseError("bad codec config");
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
  CodecModel m{cfg,
               DenseNetwork::load(in),
               DenseNetwork::load(in),
               DenseNetwork::load(in),
               DenseNetwork::load(in),
               opt,
               opt,
               opt,
               opt};
  return m;
}

}  // namespace gantrust
