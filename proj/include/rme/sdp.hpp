#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rme/polynomial.hpp"
#include "rme/relax.hpp"

namespace rme {

struct ConicProgram {
  int dim = 0;  // length of y
  std::vector<PsdBlock> blocks;
  std::vector<LinearRow> equalities;
  int normalization_row = -1;  // index into equalities, -1 if none
  LinearTerms objective;       // minimize sum c_i y_i; empty means feasibility
};

// Adds the normalization row y[1] = 1 and, optionally, an objective p (as E~[p]).
ConicProgram to_conic(const MomentRelaxation& rel, const Polynomial* objective = nullptr);

enum class SolveStatus { Converged, Infeasible, NotConverged };
const char* to_string(SolveStatus s);

struct BlockResidual {
  std::string label;
  int size = 0;
  double min_eig = 0.0;
  double trace = 0.0;
};

struct Residuals {
  double equality = 0.0;       // max |E y - b|
  double normalization = 0.0;  // |y[1] - 1|
  double psd_slack = 0.0;      // max over blocks of max(0, -min_eig) / (1 + |trace|)
  double displacement = 0.0;   // last fixed-point displacement
  int iterations = 0;
  std::vector<BlockResidual> blocks;
};

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 50000;
  double relaxation = 1.5;  // Douglas-Rachford averaging parameter in (0, 2)
  int checkpoint_every = 100;
  int divergence_window = 500;
  double objective_step = 1.0;
  int anderson_memory = 8;  // 0 gives plain Douglas-Rachford
  std::string trace_path;  // CSV trace when non-empty
};

struct Checkpoint {
  int iteration = 0;
  double displacement = 0.0;  // ||Z_{k+1} - Z_k||_F
  double max_gap = 0.0;       // max over blocks of ||X_psd - X_affine|| / (1 + |trace|)
  double equality = 0.0;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::NotConverged;
  Eigen::VectorXd y;
  Residuals residuals;
  std::vector<Checkpoint> checkpoints;
};

ConicSolution solve_conic(const ConicProgram& prog, const SolverOptions& opt = {});

struct PseudoExpectation {
  std::shared_ptr<const MonomialBasis> moments;
  Eigen::VectorXd y;
  Residuals residuals;
  // The relaxation may live in normalized coordinates: mu_data = center + scale * mu.
  Eigen::VectorXd frame_center;
  double frame_scale = 1.0;

  int n_w() const { return moments->n_w; }
  int n_mu() const { return moments->n_mu; }
  int degree() const { return moments->degree; }
};

struct SolveResult {
  SolveStatus status = SolveStatus::NotConverged;
  PseudoExpectation pe;
  std::vector<Checkpoint> checkpoints;
};

SolveResult solve(const MomentRelaxation& rel, const std::optional<Polynomial>& objective = {},
                  const SolverOptions& opt = {});

// Linear in p; throws std::out_of_range for monomials outside the degree-2r index set.
double pe_evaluate(const PseudoExpectation& pe, const Polynomial& p);

// E~[||mu - c||^2] and E~[mu] in data coordinates (undoing the frame).
double pe_squared_distance(const PseudoExpectation& pe, const Eigen::VectorXd& c);
Eigen::VectorXd pe_mean(const PseudoExpectation& pe);

}  // namespace rme
