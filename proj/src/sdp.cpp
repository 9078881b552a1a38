#include "rme/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <stdexcept>

#include <Eigen/Sparse>
#include <lapacke.h>

namespace rme {
namespace {

constexpr int kLapackEigThreshold = 500;
constexpr int kEigCheckEvery = 10;

// Symmetric eigendecomposition; eigenvalues ascending.
void sym_eig(const Eigen::MatrixXd& a, Eigen::VectorXd& evals, Eigen::MatrixXd& evecs,
             bool vectors) {
  const int n = static_cast<int>(a.rows());
  if (n >= kLapackEigThreshold) {
    evecs = a;
    evals.resize(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', n,
                                           evecs.data(), n, evals.data());
    if (info != 0) throw std::runtime_error("dsyevd failed");
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      a, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  evals = es.eigenvalues();
  if (vectors) evecs = es.eigenvectors();
}

// Frobenius projection onto the PSD cone.
void project_psd(const Eigen::MatrixXd& t, Eigen::MatrixXd& out) {
  Eigen::VectorXd lam;
  Eigen::MatrixXd v;
  sym_eig(t, lam, v, true);
  const int n = static_cast<int>(lam.size());
  int neg = 0;
  while (neg < n && lam(neg) < 0.0) ++neg;
  if (neg == 0) {
    out = t;
  } else if (neg == n) {
    out.setZero(n, n);
  } else if (neg <= n - neg) {
    const auto vn = v.leftCols(neg);
    out = t;
    out.noalias() -= vn * lam.head(neg).asDiagonal() * vn.transpose();
  } else {
    const auto vp = v.rightCols(n - neg);
    out.noalias() = vp * lam.tail(n - neg).asDiagonal() * vp.transpose();
  }
}

struct EntryRef {
  int block, row, col;
  double weight;  // Frobenius weight: 1 on the diagonal, 2 off it
};

// Projection onto {X : X_b = s_b A_b(y), E y = b} in the Frobenius metric,
// optionally with a linear objective folded in as a proximal shift.
class AffineProjector {
 public:
  AffineProjector(const ConicProgram& prog, const std::vector<double>& scale) : prog_(prog) {
    const int m = prog.dim;
    diag_.setZero(m);
    std::vector<Eigen::Triplet<double>> trip;
    int row = 0;
    for (int b = 0; b < static_cast<int>(prog.blocks.size()); ++b) {
      for (const auto& e : prog.blocks[b].entries) {
        const double w = e.row == e.col ? 1.0 : 2.0;
        const EntryRef ref{b, e.row, e.col, w};
        if (e.terms.size() == 1) {
          const auto [idx, c] = e.terms[0];
          simple_.push_back(ref);
          simple_idx_.push_back(idx);
          simple_coef_.push_back(scale[b] * c);
          diag_(idx) += w * scale[b] * scale[b] * c * c;
        } else {
          general_.push_back(ref);
          for (const auto& [idx, c] : e.terms) trip.emplace_back(row, idx, scale[b] * c);
          ++row;
        }
      }
    }
    n_general_ = row;
    for (const auto& eq : prog.equalities) {
      double mx = 0.0;
      for (const auto& t : eq.terms) mx = std::max(mx, std::abs(t.second));
      const double s = mx > 0.0 ? 1.0 / mx : 1.0;
      for (const auto& [idx, c] : eq.terms) trip.emplace_back(row, idx, s * c);
      rhs_.push_back(s * eq.rhs);
      ++row;
    }
    for (int i = 0; i < m; ++i)
      if (diag_(i) == 0.0) diag_(i) = 1e-8;  // index not seen by any simple entry
    inv_diag_ = diag_.cwiseInverse();

    bmat_.resize(row, m);
    bmat_.setFromTriplets(trip.begin(), trip.end());
    bmat_.makeCompressed();

    // K = B D^-1 B^T + diag(1/weight over general rows, 0 over equality rows)
    Eigen::SparseMatrix<double, Eigen::RowMajor> bs = bmat_ * inv_diag_.cwiseSqrt().asDiagonal();
    Eigen::SparseMatrix<double> kspar = bs * bs.transpose();
    kmat_ = Eigen::MatrixXd(kspar);
    for (int i = 0; i < n_general_; ++i) kmat_(i, i) += 1.0 / general_[i].weight;
    factor();
  }

  int rank() const { return rank_; }
  int system_size() const { return static_cast<int>(kmat_.rows()); }

  Eigen::VectorXd project(const std::vector<Eigen::MatrixXd>& z, double gamma,
                          const Eigen::VectorXd& objective) const {
    const int m = prog_.dim;
    Eigen::VectorXd num = Eigen::VectorXd::Zero(m);
    for (std::size_t s = 0; s < simple_.size(); ++s) {
      const auto& r = simple_[s];
      num(simple_idx_[s]) += r.weight * simple_coef_[s] * z[r.block](r.row, r.col);
    }
    Eigen::VectorXd xbar = num.cwiseProduct(inv_diag_);
    if (gamma != 0.0 && objective.size() == m) xbar -= gamma * objective.cwiseProduct(inv_diag_);

    const int nk = system_size();
    if (nk == 0) return xbar;
    Eigen::VectorXd rhs = bmat_ * xbar;
    for (int i = 0; i < n_general_; ++i) {
      const auto& r = general_[i];
      rhs(i) -= z[r.block](r.row, r.col);
    }
    for (int i = n_general_; i < nk; ++i) rhs(i) -= rhs_[i - n_general_];
    const Eigen::VectorXd v = solve_k(rhs);
    return xbar - inv_diag_.cwiseProduct(bmat_.transpose() * v);
  }

  // max |E y - b| with the caller's original row scaling
  double equality_residual(const Eigen::VectorXd& y) const {
    double r = 0.0;
    for (const auto& eq : prog_.equalities) {
      double v = -eq.rhs;
      for (const auto& [idx, c] : eq.terms) v += c * y(idx);
      r = std::max(r, std::abs(v));
    }
    return r;
  }

 private:
  // K is factored after symmetric Jacobi scaling: rows tied to far-away points carry
  // coefficients many orders above the rest, and the rank tolerance must not see that.
  // LAPACK's default tolerance (n u max pivot) keeps the genuinely small eigenvalues
  // (1e-11 with points at 1e5) while dropping the dependent equality rows.
  void factor() {
    const int nk = system_size();
    piv_.resize(nk);
    if (nk == 0) return;
    jac_ = kmat_.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd f = jac_.asDiagonal() * kmat_ * jac_.asDiagonal();
    lapack_int rank = 0;
    const lapack_int info =
        LAPACKE_dpstrf(LAPACK_COL_MAJOR, 'L', nk, f.data(), nk, piv_.data(), &rank, -1.0);
    if (info < 0) throw std::runtime_error("dpstrf failed");
    rank_ = static_cast<int>(rank);
    lfac_ = f.topLeftCorner(rank_, rank_).triangularView<Eigen::Lower>();
  }

  // Pseudo-solve of the scaled system; dependent pivots get zero components.
  Eigen::VectorXd solve_scaled(const Eigen::VectorXd& r) const {
    Eigen::VectorXd rp(rank_);
    for (int i = 0; i < rank_; ++i) rp(i) = r(piv_[i] - 1);
    lfac_.triangularView<Eigen::Lower>().solveInPlace(rp);
    lfac_.triangularView<Eigen::Lower>().transpose().solveInPlace(rp);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(r.size());
    for (int i = 0; i < rank_; ++i) v(piv_[i] - 1) = rp(i);
    return v;
  }

  // K v = r, refined against the unfactored system while the residual keeps shrinking;
  // far-away points leave K badly conditioned even after scaling.
  Eigen::VectorXd solve_k(const Eigen::VectorXd& r) const {
    Eigen::VectorXd v = jac_.cwiseProduct(solve_scaled(jac_.cwiseProduct(r)));
    Eigen::VectorXd res = r - kmat_ * v;
    double prev = res.norm();
    for (int step = 0; step < kMaxRefine && prev > 1e-15 * r.norm(); ++step) {
      const Eigen::VectorXd dv = jac_.cwiseProduct(solve_scaled(jac_.cwiseProduct(res)));
      const Eigen::VectorXd next = r - kmat_ * (v + dv);
      const double nn = next.norm();
      if (!(nn < 0.5 * prev)) break;
      v += dv;
      res = next;
      prev = nn;
    }
    return v;
  }

  static constexpr int kMaxRefine = 20;

  const ConicProgram& prog_;
  std::vector<EntryRef> simple_, general_;
  std::vector<int> simple_idx_;
  std::vector<double> simple_coef_;
  std::vector<double> rhs_;
  int n_general_ = 0;
  Eigen::VectorXd diag_, inv_diag_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> bmat_;
  Eigen::MatrixXd kmat_, lfac_;
  Eigen::VectorXd jac_;
  std::vector<lapack_int> piv_;
  int rank_ = 0;
};

void fill_blocks(const ConicProgram& prog, const std::vector<double>& scale,
                 const Eigen::VectorXd& y, std::vector<Eigen::MatrixXd>& out) {
  out.resize(prog.blocks.size());
  for (std::size_t b = 0; b < prog.blocks.size(); ++b) {
    const auto& blk = prog.blocks[b];
    out[b].resize(blk.size, blk.size);
    for (const auto& e : blk.entries) {
      double v = 0.0;
      for (const auto& [idx, c] : e.terms) v += c * y(idx);
      v *= scale[b];
      out[b](e.row, e.col) = v;
      out[b](e.col, e.row) = v;
    }
  }
}

// Blocks are rescaled (psd-ness is unaffected) so that their constant part has unit
// size; blocks without a constant fall back to unit largest coefficient. Scaling by
// the largest coefficient alone would let terms of far-away points swamp the rest.
std::vector<double> block_scales(const ConicProgram& prog) {
  std::vector<double> scale(prog.blocks.size(), 1.0);
  const int one = prog.normalization_row >= 0 ? prog.equalities[prog.normalization_row].terms[0].first : -1;
  for (std::size_t b = 0; b < prog.blocks.size(); ++b) {
    double constant = 0.0, mx = 0.0;
    for (const auto& e : prog.blocks[b].entries)
      for (const auto& [idx, c] : e.terms) {
        mx = std::max(mx, std::abs(c));
        if (idx == one) constant = std::max(constant, std::abs(c));
      }
    if (constant > 0.0) {
      scale[b] = 1.0 / constant;
    } else if (mx > 0.0) {
      scale[b] = 1.0 / mx;
    }
  }
  return scale;
}

void validate(const ConicProgram& prog) {
  if (prog.dim <= 0) throw std::invalid_argument("empty moment vector");
  auto check_terms = [&](const LinearTerms& t) {
    for (const auto& [idx, c] : t)
      if (idx < 0 || idx >= prog.dim) throw std::invalid_argument("index out of range");
  };
  for (const auto& b : prog.blocks) {
    if (b.size <= 0) throw std::invalid_argument("block sizes must be positive");
    if (static_cast<long long>(b.entries.size()) != 1LL * b.size * (b.size + 1) / 2)
      throw std::invalid_argument("block " + b.label + " must list its full upper triangle");
    for (const auto& e : b.entries) check_terms(e.terms);
  }
  for (const auto& r : prog.equalities) check_terms(r.terms);
  check_terms(prog.objective);
}

Residuals measure(const ConicProgram& prog, const Eigen::VectorXd& y, double equality_residual) {
  Residuals res;
  res.equality = equality_residual;
  if (prog.normalization_row >= 0) {
    const auto& row = prog.equalities[prog.normalization_row];
    double v = -row.rhs;
    for (const auto& [idx, c] : row.terms) v += c * y(idx);
    res.normalization = std::abs(v);
  }
  std::vector<Eigen::MatrixXd> blocks;
  fill_blocks(prog, std::vector<double>(prog.blocks.size(), 1.0), y, blocks);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Eigen::VectorXd lam;
    Eigen::MatrixXd unused;
    sym_eig(blocks[b], lam, unused, false);
    BlockResidual br{prog.blocks[b].label, prog.blocks[b].size, lam.minCoeff(), blocks[b].trace()};
    res.psd_slack = std::max(res.psd_slack, std::max(0.0, -br.min_eig) / (1.0 + std::abs(br.trace)));
    res.blocks.push_back(br);
  }
  return res;
}

double psd_slack(const ConicProgram& prog, const Eigen::VectorXd& y) {
  std::vector<Eigen::MatrixXd> blocks;
  fill_blocks(prog, std::vector<double>(prog.blocks.size(), 1.0), y, blocks);
  double slack = 0.0;
  for (const auto& b : blocks) {
    Eigen::VectorXd lam;
    Eigen::MatrixXd unused;
    sym_eig(b, lam, unused, false);
    slack = std::max(slack, std::max(0.0, -lam.minCoeff()) / (1.0 + std::abs(b.trace())));
  }
  return slack;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::NotConverged:
      return "not_converged";
  }
  return "unknown";
}

ConicProgram to_conic(const MomentRelaxation& rel, const Polynomial* objective) {
  ConicProgram p;
  p.dim = rel.moments.size();
  p.blocks = rel.blocks;
  p.equalities = rel.equalities;
  p.normalization_row = static_cast<int>(p.equalities.size());
  p.equalities.push_back({{{rel.moments.find(Monomial()), 1.0}}, 1.0});
  if (objective) {
    std::map<int, double> acc;
    for (const auto& [m, c] : objective->terms()) {
      const int idx = rel.moments.find(reduce_monomial(m, rel.n_w()));
      if (idx < 0) throw std::out_of_range("objective monomial outside the relaxation");
      acc[idx] += c;
    }
    for (const auto& [idx, c] : acc)
      if (c != 0.0) p.objective.push_back({idx, c});
  }
  return p;
}

ConicSolution solve_conic(const ConicProgram& prog, const SolverOptions& opt) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(opt.relaxation > 0.0 && opt.relaxation < 2.0))
    throw std::invalid_argument("relaxation must lie in (0, 2)");
  validate(prog);

  const std::size_t nb = prog.blocks.size();
  const std::vector<double> scale = block_scales(prog);

  const AffineProjector proj(prog, scale);
  Eigen::VectorXd objective;
  if (!prog.objective.empty()) {
    objective.setZero(prog.dim);
    for (const auto& [idx, c] : prog.objective) objective(idx) += c;
  }
  const double gamma = prog.objective.empty() ? 0.0 : opt.objective_step;

  std::vector<Eigen::MatrixXd> z(nb);
  for (std::size_t b = 0; b < nb; ++b) z[b].setZero(prog.blocks[b].size, prog.blocks[b].size);
  long flat_size = 0;
  for (const auto& m : z) flat_size += m.size();

  std::ofstream trace;
  if (!opt.trace_path.empty()) {
    trace.open(opt.trace_path);
    if (!trace) throw std::runtime_error("cannot open trace file " + opt.trace_path);
    trace << "iteration,displacement,max_gap,equality\n";
    trace.precision(10);
  }

  const double alpha = opt.relaxation;
  // One application of the averaged Douglas-Rachford map T at zz.
  struct Eval {
    Eigen::VectorXd y;
    std::vector<Eigen::MatrixXd> tz;  // T(zz)
    double displacement = 0.0;        // ||T(zz) - zz||
    double max_gap = 0.0;
    bool within_tol = true;
  };
  std::vector<Eigen::MatrixXd> xv, xk(nb);
  auto evaluate = [&](const std::vector<Eigen::MatrixXd>& zz) {
    Eval e;
    e.y = proj.project(zz, gamma, objective);
    fill_blocks(prog, scale, e.y, xv);
    e.tz.resize(nb);
    double disp2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      project_psd(2.0 * xv[b] - zz[b], xk[b]);
      const double gap = (xk[b] - xv[b]).norm();
      const double rel = gap / (1.0 + std::abs(xv[b].trace()));
      e.max_gap = std::max(e.max_gap, rel);
      if (rel > opt.tol) e.within_tol = false;
      disp2 += alpha * alpha * gap * gap;
      e.tz[b] = zz[b] + alpha * (xk[b] - xv[b]);
    }
    e.displacement = std::sqrt(disp2);
    return e;
  };
  auto flatten = [&](const std::vector<Eigen::MatrixXd>& blocks) {
    Eigen::VectorXd v(flat_size);
    long off = 0;
    for (const auto& m : blocks) {
      v.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
      off += m.size();
    }
    return v;
  };
  auto unflatten = [&](const Eigen::VectorXd& v) {
    std::vector<Eigen::MatrixXd> blocks(nb);
    long off = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const int n = prog.blocks[b].size;
      blocks[b] = Eigen::Map<const Eigen::MatrixXd>(v.data() + off, n, n);
      off += static_cast<long>(n) * n;
    }
    return blocks;
  };

  ConicSolution sol;
  std::deque<double> history;  // displacement of accepted iterates over the last window
  // Anderson memory: differences of accepted iterates and of their residuals g = z - T(z)
  std::deque<Eigen::VectorXd> dz_hist, dg_hist;
  SolveStatus status = SolveStatus::NotConverged;
  int it = 1;
  int next_checkpoint = opt.checkpoint_every;
  int next_eig_check = kEigCheckEvery;
  Eval cur = evaluate(z);
  Eigen::VectorXd zf = flatten(z), gf = zf - flatten(cur.tz);

  auto record = [&](int iter) {
    const double eq = proj.equality_residual(cur.y);
    sol.checkpoints.push_back({iter, cur.displacement, cur.max_gap, eq});
    if (trace) trace << iter << ',' << cur.displacement << ',' << cur.max_gap << ',' << eq << '\n';
  };

  while (true) {
    bool done = cur.within_tol;
    // Feasibility solves may stop once the affine iterate itself is psd to tolerance,
    // which the Frobenius gap bounds only loosely.
    if (!done && gamma == 0.0 && it >= next_eig_check) {
      next_eig_check = it + kEigCheckEvery;
      done = psd_slack(prog, cur.y) <= opt.tol;
    }
    const bool checkpoint = it >= next_checkpoint;
    if (checkpoint) next_checkpoint = (it / opt.checkpoint_every + 1) * opt.checkpoint_every;
    if (checkpoint || done) record(it);
    if (done) {
      status = SolveStatus::Converged;
      break;
    }
    history.push_back(cur.displacement);
    if (static_cast<int>(history.size()) > opt.divergence_window) {
      const double old = history.front();
      history.pop_front();
      // the displacement has stopped shrinking while staying well above tol
      if (cur.displacement > 10.0 * opt.tol && cur.displacement >= (1.0 - 1e-3) * old) {
        status = SolveStatus::Infeasible;
        break;
      }
    }
    if (it >= opt.max_iter) break;

    // Candidate from the Anderson extrapolation, kept only if it does not increase the
    // fixed-point residual; otherwise the plain step, which never does.
    std::vector<Eigen::MatrixXd> next_z;
    Eval next;
    bool accepted = false;
    if (opt.anderson_memory > 0 && !dg_hist.empty()) {
      const int m = static_cast<int>(dg_hist.size());
      Eigen::MatrixXd dg(flat_size, m), dz(flat_size, m);
      for (int i = 0; i < m; ++i) {
        dg.col(i) = dg_hist[i];
        dz.col(i) = dz_hist[i];
      }
      Eigen::MatrixXd gram = dg.transpose() * dg;
      gram.diagonal().array() += 1e-10 * gram.trace() + 1e-300;
      const Eigen::VectorXd coef = gram.ldlt().solve(dg.transpose() * gf);
      if (coef.allFinite()) {
        const Eigen::VectorXd cand = flatten(cur.tz) - (dz - dg) * coef;
        next_z = unflatten(cand);
        next = evaluate(next_z);
        ++it;
        accepted = next.displacement <= cur.displacement;
      }
    }
    if (!accepted) {
      if (it >= opt.max_iter && opt.anderson_memory > 0 && !dg_hist.empty()) break;
      next_z = cur.tz;
      next = evaluate(next_z);
      ++it;
    }
    const Eigen::VectorXd nzf = flatten(next_z);
    const Eigen::VectorXd ngf = nzf - flatten(next.tz);
    dz_hist.push_back(nzf - zf);
    dg_hist.push_back(ngf - gf);
    if (static_cast<int>(dg_hist.size()) > opt.anderson_memory) {
      dz_hist.pop_front();
      dg_hist.pop_front();
    }
    z = std::move(next_z);
    zf = nzf;
    gf = ngf;
    cur = std::move(next);
  }

  sol.status = status;
  sol.y = cur.y;
  sol.residuals = measure(prog, cur.y, proj.equality_residual(cur.y));
  sol.residuals.displacement = cur.displacement;
  sol.residuals.iterations = it;
  if (trace && (sol.checkpoints.empty() || sol.checkpoints.back().iteration != it))
    trace << it << ',' << cur.displacement << ',' << cur.max_gap << ',' << sol.residuals.equality
          << '\n';
  return sol;
}

SolveResult solve(const MomentRelaxation& rel, const std::optional<Polynomial>& objective,
                  const SolverOptions& opt) {
  const ConicProgram prog = to_conic(rel, objective ? &*objective : nullptr);
  ConicSolution sol = solve_conic(prog, opt);
  SolveResult out;
  out.status = sol.status;
  out.checkpoints = std::move(sol.checkpoints);
  out.pe.moments = std::make_shared<const MonomialBasis>(rel.moments);
  out.pe.y = std::move(sol.y);
  out.pe.residuals = std::move(sol.residuals);
  out.pe.frame_center = Eigen::VectorXd::Zero(rel.n_mu());
  out.pe.frame_scale = 1.0;
  return out;
}

double pe_evaluate(const PseudoExpectation& pe, const Polynomial& p) {
  double total = 0.0;
  for (const auto& [m, c] : p.terms()) {
    const Monomial red = reduce_monomial(m, pe.n_w());
    const int idx = pe.moments->find(red);
    if (idx < 0) throw std::out_of_range("monomial " + red.to_string(pe.n_w()) + " outside the pseudo-expectation");
    total += c * pe.y(idx);
  }
  return total;
}

Eigen::VectorXd pe_mean(const PseudoExpectation& pe) {
  const int d = pe.n_mu();
  Eigen::VectorXd m(d);
  for (int j = 0; j < d; ++j)
    m(j) = pe_evaluate(pe, Polynomial::variable(static_cast<VarId>(pe.n_w() + j)));
  return pe.frame_center + pe.frame_scale * m;
}

double pe_squared_distance(const PseudoExpectation& pe, const Eigen::VectorXd& c) {
  // ||center + s mu - c||^2 = s^2 ||mu - c'||^2 with c' = (c - center) / s
  const int d = pe.n_mu();
  const Eigen::VectorXd cp = (c - pe.frame_center) / pe.frame_scale;
  Polynomial p;
  for (int j = 0; j < d; ++j) {
    const Polynomial diff = Polynomial::variable(static_cast<VarId>(pe.n_w() + j)) - Polynomial(cp(j));
    p += diff * diff;
  }
  return pe.frame_scale * pe.frame_scale * pe_evaluate(pe, p);
}

}  // namespace rme
