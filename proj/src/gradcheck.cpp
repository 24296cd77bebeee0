#include "ddqn/neural/gradcheck.hpp"

namespace ddqn::nn {

namespace {

Matrix<double> uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform_unit(rng) - 1.0;
  return m;
}

}  // namespace

GradcheckProblem random_gradcheck_problem(const NetSpec& spec, std::uint64_t seed,
                                          Eigen::Index batch, double kink_margin) {
  Rng rng = make_stream(seed, "gradcheck");
  GradcheckProblem p{DuelingNet<double>::glorot(spec, rng), {}, {}};
  p.loss_weights = uniform_matrix(rng, batch, kActionCount);
  for (int attempt = 0;; ++attempt) {
    p.input = uniform_matrix(rng, batch, spec.input_size());
    ForwardCache<double> cache;
    p.net.forward(p.input, &cache);
    if (min_abs_preactivation(cache) >= kink_margin) return p;
    // Wide layers may never clear the margin for a whole batch; shrink it.
    if (attempt % 50 == 49 && batch > 1) --batch;
  }
}

}  // namespace ddqn::nn
