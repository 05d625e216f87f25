#pragma once

/*
 * Minimal dense-network substrate: row-major double matrices, fully
 * connected layers with optional batch normalization, leaky-rectifier /
 * tanh / sigmoid activations, Adam, and the two training losses used by
 * the trust models. Everything is deterministic given an Rng.
 */

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gantrust/errors.hpp"
#include "gantrust/rng.hpp"

namespace gantrust {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);     // a(m,k) * b(k,n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a(m,k) * b(n,k)^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a(k,m)^T * b(k,n)
Matrix hconcat(const Matrix& a, const Matrix& b);    // columns of a then b

enum class Act { linear, tanh_act, sigmoid, leaky_relu };

// slope of the leaky rectifier's negative half
inline constexpr double kLeakySlope = 0.2;
// batch-norm variance floor applied before every sqrt
inline constexpr double kBnVarFloor = 1e-8;
// running-stat blend: run = momentum * run + (1 - momentum) * batch
inline constexpr double kBnMomentum = 0.9;

struct LayerSpec {
  int in = 0;
  int out = 0;
  Act act = Act::linear;
  bool batch_norm = false;
};

struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<double> m, v;
};

class DenseNetwork {
 public:
  DenseNetwork() = default;
  // weights ~ N(0, 0.05^2), biases zero, gamma 1, beta 0
  DenseNetwork(std::vector<LayerSpec> specs, Rng& rng, double init_stddev = 0.05);

  // train=true caches intermediates for backward and, with batch norm,
  // normalizes by batch statistics (batch must have >= 2 rows) while
  // updating running statistics; train=false uses running statistics.
  Matrix forward(const Matrix& x, bool train);

  // dL/d(output) -> dL/d(input); accumulates parameter gradients.
  // Requires a preceding train-mode forward; consumes its cache.
  Matrix backward(const Matrix& dout);

  // applies accumulated gradients with Adam, then clears them
  void adam_step(AdamState& opt);
  void zero_grads();
  // Restarts batch-norm running statistics; follow with train-mode forwards
  // over representative batches so inference normalizes like the data it will
  // actually score.
  void reset_running_stats();

  int param_count() const;
  std::vector<double> flat_params() const;
  void set_flat_params(const std::vector<double>& p);
  std::vector<double> flat_grads() const;
  void add_grad(int flat_index, double delta);  // used by the checker self-test

  int input_dim() const;
  int output_dim() const;
  const std::vector<LayerSpec>& specs() const { return specs_; }

  void save(std::ostream& os) const;
  static DenseNetwork load(std::istream& is);

 private:
  struct Layer {
    LayerSpec spec;
    Matrix w;  // out x in
    std::vector<double> b;
    std::vector<double> gamma, beta, run_mean, run_var;
    // grads
    Matrix gw;
    std::vector<double> gb, ggamma, gbeta;
    // forward cache (train mode)
    Matrix x_in, z, xhat, pre_act, a;
    std::vector<double> mean, istd;
    std::vector<bool> var_floored;
  };

  std::vector<LayerSpec> specs_;
  std::vector<Layer> layers_;
  bool have_cache_ = false;

  friend double gradient_check(DenseNetwork&, const Matrix&, double, double);
};

struct LossValue {
  double value = 0.0;
  Matrix grad;  // dL/d(pred)
};

// 0.5 * mean((pred - target)^2), gradient (pred - target) / count
// strtod-based conversion that accepts hexfloat tokens (istream >> double
// does not); throws ParseError on malformed input
double parse_double(const std::string& tok);

LossValue least_squares(const Matrix& pred, const Matrix& target);
// mean(|pred - target|), gradient sign(pred - target) / count, sign(0) = 0
LossValue mean_abs(const Matrix& pred, const Matrix& target);

/*
 * Central-difference check of backward() against the least-squares loss
 * toward a zero target. Returns the maximum relative error over all
 * parameters (0 when analytic and numeric both vanish). `corruption` is
 * added to the first analytic gradient entry so tests can confirm the
 * checker notices a broken gradient. Restores parameters before returning.
 */
double gradient_check(DenseNetwork& net, const Matrix& batch, double eps = 1e-5,
                      double corruption = 0.0);

}  // namespace gantrust
