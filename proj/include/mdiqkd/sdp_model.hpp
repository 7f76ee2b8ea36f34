#pragma once

// Assembly of the Gram-matrix SDP: one Hermitian block per conclusive
// announcement (Psi+ / Psi-), linear statistics constraints, a residual PSD
// constraint  Lambda - G+ - G-  >= 0  replacing the inconclusive block, and
// the phase-error objective.
//
// Joint-state indexing everywhere follows ProtocolSpec::joint_index, i.e.
// lexicographic in (x, a, y, b).

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdiqkd/observed.hpp"
#include "mdiqkd/states.hpp"

namespace mdiqkd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_hermitian(const Eigen::MatrixXcd& m, double tol = 1e-12) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Hermitian coefficient pair, one matrix per conclusive announcement.
/// A functional evaluates as <C,G> = sum_ij conj(C_ij) G_ij summed over both
/// blocks; Hermitian coefficients make the value real on Hermitian arguments.
struct BlockCoeff {
  Eigen::MatrixXcd plus;
  Eigen::MatrixXcd minus;

  static BlockCoeff zero(int dim) {
    BlockCoeff c;
    c.plus = Eigen::MatrixXcd::Zero(dim, dim);
    c.minus = Eigen::MatrixXcd::Zero(dim, dim);
    return c;
  }

  double evaluate(const Eigen::MatrixXcd& g_plus, const Eigen::MatrixXcd& g_minus) const {
    const Complex v = (plus.conjugate().cwiseProduct(g_plus)).sum() +
                      (minus.conjugate().cwiseProduct(g_minus)).sum();
    return v.real();
  }

  BlockCoeff& axpy(double a, const BlockCoeff& o) {
    plus += a * o.plus;
    minus += a * o.minus;
    return *this;
  }

  bool is_zero(double tol = 0.0) const {
    return plus.cwiseAbs().maxCoeff() <= tol && minus.cwiseAbs().maxCoeff() <= tol;
  }
};

struct SdpEquality {
  BlockCoeff coeff;
  double value = 0.0;
  std::string label;
};

struct SdpInequality {
  BlockCoeff coeff;
  double lower = -kInf;
  double upper = kInf;
  std::string label;
};

/// The assembled problem: maximize  objective_constant + <objective, G>
/// subject to the listed constraints, G+/- >= 0, Lambda - G+ - G- >= 0 and
/// the cap  objective <= objective_cap.
struct SdpProblem {
  int dim = 0;
  Eigen::MatrixXcd lambda;
  BlockCoeff objective;
  double objective_constant = 0.0;
  double objective_cap = 0.5;
  std::vector<SdpEquality> equalities;
  std::vector<SdpInequality> inequalities;

  double objective_value(const Eigen::MatrixXcd& gp, const Eigen::MatrixXcd& gm) const {
    return objective_constant + objective.evaluate(gp, gm);
  }
};

/// Per-announcement qubit correction and target Bell state, expressed in the
/// key-bit basis of the virtual qubits (bit 0 <-> |+>, bit 1 <-> |->).
struct CorrectionConvention {
  Eigen::Matrix2cd correction_plus;
  Eigen::Matrix2cd correction_minus;
  Eigen::Vector4cd target;  // ordered |a b> with a,b key bits

  /// Identity on Psi+, key-bit flip (Pauli-Z on the virtual qubit) on Psi-;
  /// target correlated in the key bits.
  static CorrectionConvention phase_encoding() {
    CorrectionConvention c;
    c.correction_plus = Eigen::Matrix2cd::Identity();
    c.correction_minus << 0, 1, 1, 0;
    c.target << 1.0 / std::sqrt(2.0), 0, 0, -1.0 / std::sqrt(2.0);
    return c;
  }

  /// Honest time-phase BSM anti-correlates the key bits on both
  /// announcements: anti-correlated target, sign correction on Psi-.
  static CorrectionConvention single_photon_z() {
    CorrectionConvention c;
    c.correction_plus = Eigen::Matrix2cd::Identity();
    c.correction_minus << 1, 0, 0, -1;
    c.target << 0, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0;
    return c;
  }

  static CorrectionConvention for_family(ProtocolFamily f) {
    return f == ProtocolFamily::DecoySinglePhoton ? single_photon_z() : phase_encoding();
  }
};

/// Phase-error functional: constant + coefficient matrices per announcement.
/// With exact statistics the constant is 1/2 and the coefficients carry the
/// observed-P_pass normalization (value is exactly 1/2 on zero matrices).
/// With interval statistics (decoy) the constant is 0 and the coefficients
/// realize the sound surrogate (phase-error mass) / Y11^L.
struct PhaseErrorFunctional {
  double constant = 0.5;
  BlockCoeff coeff;

  double evaluate(const Eigen::MatrixXcd& gp, const Eigen::MatrixXcd& gm) const {
    return constant + coeff.evaluate(gp, gm);
  }
};

namespace detail {

// Pauli-Y on the virtual qubit, written in the key-bit basis (|+>,|->).
inline Eigen::Matrix2cd y_in_bit_basis() {
  Eigen::Matrix2cd y;
  y << Complex(0, 0), Complex(0, 1), Complex(0, -1), Complex(0, 0);
  return y;
}

inline Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

// Unnormalized phase-error mass weights: 4x4 Hermitian matrices per
// announcement over the key-bit pairs (a,b), such that
//   e_ph * P_pass^K = sum_z sum_{(ab),(a'b')} W^z G^z .
inline std::pair<Eigen::Matrix4cd, Eigen::Matrix4cd> phase_error_weights(
    const CorrectionConvention& conv) {
  const Eigen::Matrix2cd y = y_in_bit_basis();
  const Eigen::Matrix4cd yy = kron2(y, y);
  const Complex s_c = (conv.target.adjoint() * yy * conv.target)(0, 0);
  if (std::abs(s_c.imag()) > 1e-12 || std::abs(std::abs(s_c.real()) - 1.0) > 1e-12) {
    throw std::invalid_argument("target state must be a Y(x)Y eigenstate");
  }
  const double s = s_c.real();
  const Eigen::Matrix4cd proj = 0.5 * (Eigen::Matrix4cd::Identity() - s * yy);
  const Eigen::Matrix4cd wp = kron2(Eigen::Matrix2cd::Identity(), conv.correction_plus);
  const Eigen::Matrix4cd wm = kron2(Eigen::Matrix2cd::Identity(), conv.correction_minus);
  return {0.25 * (wp.adjoint() * proj * wp), 0.25 * (wm.adjoint() * proj * wm)};
}

// Embeds 4x4 weights over key-bit pairs into d x d coefficient matrices,
// transposing so that <C,G> reproduces sum W_IJ G_IJ.
inline BlockCoeff embed_key_weights(const ProtocolSpec& p, const Eigen::Matrix4cd& wp,
                                    const Eigen::Matrix4cd& wm) {
  BlockCoeff c = BlockCoeff::zero(p.joint_dim());
  const int k = p.key_basis;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int a2 = 0; a2 < 2; ++a2)
        for (int b2 = 0; b2 < 2; ++b2) {
          const int row = p.joint_index(k, a, k, b);
          const int col = p.joint_index(k, a2, k, b2);
          c.plus(row, col) += std::conj(wp(2 * a + b, 2 * a2 + b2));
          c.minus(row, col) += std::conj(wm(2 * a + b, 2 * a2 + b2));
        }
  return c;
}

}  // namespace detail

/// Raw phase-error mass functional (no normalization):  <coeff, G> equals
/// e_ph * P_pass^K for Gram blocks of actual states.
inline BlockCoeff phase_error_mass(const ProtocolSpec& p, const CorrectionConvention& conv) {
  auto [wp, wm] = detail::phase_error_weights(conv);
  return detail::embed_key_weights(p, wp, wm);
}

/// The Appendix-A-style functional with explicit constant. `pass_norm` is the
/// conditioning probability: the observed key-basis P_pass for exact
/// statistics. Passing pass_norm <= 0 degenerates to the constant 1/2
/// (zero-mass conditioning; the cap binds).
inline PhaseErrorFunctional phase_error_functional(const ProtocolSpec& p,
                                                   const CorrectionConvention& conv,
                                                   double pass_norm) {
  PhaseErrorFunctional f;
  f.constant = 0.5;
  f.coeff = BlockCoeff::zero(p.joint_dim());
  if (pass_norm <= 0.0) return f;

  auto [wp, wm] = detail::phase_error_weights(conv);
  // Split off the diagonal key-block part, whose sum equals P_pass^K / 2;
  // with P_pass constrained to the observed value it folds into the 1/2.
  for (int i = 0; i < 4; ++i) {
    if (std::abs(wp(i, i) - 0.125) > 1e-12 || std::abs(wm(i, i) - 0.125) > 1e-12) {
      throw std::invalid_argument("correction convention has non-uniform diagonal weights");
    }
  }
  const Eigen::Matrix4cd diag_part = 0.125 * Eigen::Matrix4cd::Identity();
  const Eigen::Matrix4cd op = (wp - diag_part) / pass_norm;
  const Eigen::Matrix4cd om = (wm - diag_part) / pass_norm;
  f.coeff = detail::embed_key_weights(p, op, om);
  return f;
}

struct PairFunctionals {
  int basis_a = 0;
  int basis_b = 0;
  BlockCoeff pass;        // P_pass^(x,y): prior-weighted conclusive diagonals
  BlockCoeff error_mass;  // P(pass and flip-adjusted error | basis pair)
};

/// One pass functional and one error-mass functional per ordered basis pair
/// (x, y); all of these statistics are announced and sifted in the actual
/// protocol, and each is a diagonal functional of the conclusive blocks.
inline std::vector<PairFunctionals> statistics_functionals(const ProtocolSpec& p) {
  const int d = p.joint_dim();
  std::vector<PairFunctionals> out;
  out.reserve(static_cast<std::size_t>(p.num_bases) * p.num_bases);
  for (int x = 0; x < p.num_bases; ++x) {
    for (int y = 0; y < p.num_bases; ++y) {
      PairFunctionals f;
      f.basis_a = x;
      f.basis_b = y;
      f.pass = BlockCoeff::zero(d);
      f.error_mass = BlockCoeff::zero(d);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double w = p.bit_prior[a][b];
          const int idx = p.joint_index(x, a, y, b);
          f.pass.plus(idx, idx) += w;
          f.pass.minus(idx, idx) += w;
          if (counts_as_error(p.family, x, y, p.key_basis, a, b, true)) {
            f.error_mass.plus(idx, idx) += w;
          }
          if (counts_as_error(p.family, x, y, p.key_basis, a, b, false)) {
            f.error_mass.minus(idx, idx) += w;
          }
        }
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

/// Builds the SDP of the maximize-e_ph form. Exact statistics become
/// equalities, interval statistics become one-sided rows; interval bit-error
/// entries couple to the pass functional as  mass - e^U * pass <= 0.
inline SdpProblem assemble_sdp(const ProtocolSpec& p, const ObservedStats& observed) {
  if (observed.num_bases != p.num_bases ||
      static_cast<int>(observed.pairs.size()) != p.num_bases * p.num_bases) {
    throw std::invalid_argument("observed statistics do not match protocol basis count");
  }
  for (const auto& bs : observed.pairs) {
    if (!bs.present) continue;
    const auto check01 = [](const StatEntry& e, const char* what) {
      const double lo = e.exact ? e.value : e.lower;
      const double hi = e.exact ? e.value : e.upper;
      if (lo < -1e-12 || hi > 1.0 + 1e-12 || lo > hi + 1e-12) {
        throw std::invalid_argument(std::string(what) + " out of range");
      }
    };
    check01(bs.pass_probability, "pass probability");
    check01(bs.bit_error, "bit error rate");
  }
  if (!observed.pair(p.key_basis, p.key_basis).present) {
    throw std::invalid_argument("key-basis statistics are required");
  }

  SdpProblem prob;
  prob.dim = p.joint_dim();
  prob.lambda = lambda_matrix(p);
  prob.objective_cap = 0.5;

  const auto funcs = statistics_functionals(p);
  for (const auto& fn : funcs) {
    const auto& st = observed.pair(fn.basis_a, fn.basis_b);
    if (!st.present) continue;
    const std::string tag = "pair" + std::to_string(fn.basis_a) + std::to_string(fn.basis_b);
    if (st.pass_probability.exact) {
      prob.equalities.push_back({fn.pass, st.pass_probability.value, "pass_" + tag});
    } else {
      prob.inequalities.push_back(
          {fn.pass, st.pass_probability.lower, st.pass_probability.upper, "pass_" + tag});
    }
    if (st.bit_error.exact) {
      if (!st.pass_probability.exact) {
        throw std::invalid_argument("exact bit error with interval pass probability unsupported");
      }
      const double mass = st.bit_error.value * st.pass_probability.value;
      prob.equalities.push_back({fn.error_mass, mass, "error_" + tag});
    } else {
      // mass <= e^U * pass, linear in G since both sides are functionals.
      BlockCoeff coupled = fn.error_mass;
      coupled.axpy(-st.bit_error.upper, fn.pass);
      prob.inequalities.push_back({coupled, -kInf, 0.0, "error_" + tag});
    }
  }

  const auto conv = CorrectionConvention::for_family(p.family);
  const auto& key_stats = observed.pair(p.key_basis, p.key_basis);
  if (key_stats.pass_probability.exact) {
    const double pass = key_stats.pass_probability.value;
    const auto f = phase_error_functional(p, conv, pass);
    prob.objective = f.coeff;
    prob.objective_constant = f.constant;
  } else {
    // Surrogate (phase-error mass)/Y11^L; a pointwise upper bound on
    // mass/yield because the mass is nonnegative and yield >= Y11^L.
    const double y_low = key_stats.pass_probability.lower;
    if (y_low <= 0.0) {
      prob.objective = BlockCoeff::zero(prob.dim);
      prob.objective_constant = 0.5;
    } else {
      prob.objective = phase_error_mass(p, conv);
      prob.objective.plus /= y_low;
      prob.objective.minus /= y_low;
      prob.objective_constant = 0.0;
    }
  }
  return prob;
}

// ---------------------------------------------------------------------------
// Plain-text serialization (solver interchange / debugging).
//
//   mdiqkd-sdp 1
//   dim <d>
//   objective_constant <v>
//   objective_cap <v>
//   lambda            (then d lines of 2d fields: re im re im ...)
//   objective_plus    (matrix)
//   objective_minus   (matrix)
//   equalities <n>    (each: "eq <value>" + plus matrix + minus matrix)
//   inequalities <n>  (each: "ineq <lo> <hi>" with -inf/inf + two matrices)
//   end

namespace detail {

inline void write_matrix(std::ostream& os, const Eigen::MatrixXcd& m) {
  os << std::setprecision(17);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j).real() << ' ' << m(i, j).imag();
    }
    os << '\n';
  }
}

inline Eigen::MatrixXcd read_matrix(std::istream& is, int d, int& line_no) {
  Eigen::MatrixXcd m(d, d);
  std::string line;
  for (int i = 0; i < d; ++i) {
    if (!std::getline(is, line)) throw std::runtime_error("unexpected end of matrix data");
    ++line_no;
    std::istringstream ls(line);
    for (int j = 0; j < d; ++j) {
      double re, im;
      if (!(ls >> re >> im)) {
        throw std::runtime_error("bad matrix row at line " + std::to_string(line_no));
      }
      m(i, j) = Complex(re, im);
    }
  }
  return m;
}

inline void write_bound(std::ostream& os, double v) {
  if (v == kInf) {
    os << "inf";
  } else if (v == -kInf) {
    os << "-inf";
  } else {
    os << std::setprecision(17) << v;
  }
}

inline double read_bound(const std::string& tok) {
  if (tok == "inf") return kInf;
  if (tok == "-inf") return -kInf;
  return std::stod(tok);
}

}  // namespace detail

inline void write_sdp(std::ostream& os, const SdpProblem& p) {
  os << "mdiqkd-sdp 1\n";
  os << "dim " << p.dim << '\n';
  os << std::setprecision(17);
  os << "objective_constant " << p.objective_constant << '\n';
  os << "objective_cap " << p.objective_cap << '\n';
  os << "lambda\n";
  detail::write_matrix(os, p.lambda);
  os << "objective_plus\n";
  detail::write_matrix(os, p.objective.plus);
  os << "objective_minus\n";
  detail::write_matrix(os, p.objective.minus);
  os << "equalities " << p.equalities.size() << '\n';
  for (const auto& eq : p.equalities) {
    os << "eq " << std::setprecision(17) << eq.value << '\n';
    detail::write_matrix(os, eq.coeff.plus);
    detail::write_matrix(os, eq.coeff.minus);
  }
  os << "inequalities " << p.inequalities.size() << '\n';
  for (const auto& iq : p.inequalities) {
    os << "ineq ";
    detail::write_bound(os, iq.lower);
    os << ' ';
    detail::write_bound(os, iq.upper);
    os << '\n';
    detail::write_matrix(os, iq.coeff.plus);
    detail::write_matrix(os, iq.coeff.minus);
  }
  os << "end\n";
}

inline SdpProblem read_sdp(std::istream& is) {
  int line_no = 0;
  std::string line;
  const auto next = [&](const char* what) {
    if (!std::getline(is, line)) throw std::runtime_error(std::string("missing ") + what);
    ++line_no;
    return std::istringstream(line);
  };

  {
    auto ls = next("header");
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "mdiqkd-sdp" || version != 1) throw std::runtime_error("bad header");
  }
  SdpProblem p;
  {
    auto ls = next("dim");
    std::string kw;
    ls >> kw >> p.dim;
    if (kw != "dim" || p.dim <= 0) throw std::runtime_error("bad dim line");
  }
  {
    auto ls = next("objective_constant");
    std::string kw;
    ls >> kw >> p.objective_constant;
    if (kw != "objective_constant") throw std::runtime_error("bad objective_constant line");
  }
  {
    auto ls = next("objective_cap");
    std::string kw;
    ls >> kw >> p.objective_cap;
    if (kw != "objective_cap") throw std::runtime_error("bad objective_cap line");
  }
  {
    auto ls = next("lambda");
    std::string kw;
    ls >> kw;
    if (kw != "lambda") throw std::runtime_error("expected lambda section");
    p.lambda = detail::read_matrix(is, p.dim, line_no);
  }
  {
    auto ls = next("objective_plus");
    std::string kw;
    ls >> kw;
    if (kw != "objective_plus") throw std::runtime_error("expected objective_plus");
    p.objective.plus = detail::read_matrix(is, p.dim, line_no);
  }
  {
    auto ls = next("objective_minus");
    std::string kw;
    ls >> kw;
    if (kw != "objective_minus") throw std::runtime_error("expected objective_minus");
    p.objective.minus = detail::read_matrix(is, p.dim, line_no);
  }
  {
    auto ls = next("equalities");
    std::string kw;
    int n = 0;
    ls >> kw >> n;
    if (kw != "equalities" || n < 0) throw std::runtime_error("bad equalities line");
    for (int k = 0; k < n; ++k) {
      auto hs = next("eq");
      std::string ekw;
      double value;
      hs >> ekw >> value;
      if (ekw != "eq") throw std::runtime_error("expected eq at line " + std::to_string(line_no));
      SdpEquality eq;
      eq.value = value;
      eq.label = "eq" + std::to_string(k);
      eq.coeff.plus = detail::read_matrix(is, p.dim, line_no);
      eq.coeff.minus = detail::read_matrix(is, p.dim, line_no);
      p.equalities.push_back(std::move(eq));
    }
  }
  {
    auto ls = next("inequalities");
    std::string kw;
    int n = 0;
    ls >> kw >> n;
    if (kw != "inequalities" || n < 0) throw std::runtime_error("bad inequalities line");
    for (int k = 0; k < n; ++k) {
      auto hs = next("ineq");
      std::string ikw, lo, hi;
      hs >> ikw >> lo >> hi;
      if (ikw != "ineq") {
        throw std::runtime_error("expected ineq at line " + std::to_string(line_no));
      }
      SdpInequality iq;
      iq.lower = detail::read_bound(lo);
      iq.upper = detail::read_bound(hi);
      iq.label = "ineq" + std::to_string(k);
      iq.coeff.plus = detail::read_matrix(is, p.dim, line_no);
      iq.coeff.minus = detail::read_matrix(is, p.dim, line_no);
      p.inequalities.push_back(std::move(iq));
    }
  }
  return p;
}

}  // namespace mdiqkd
