#include "spectralflow/reference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "spectralflow/errors.hpp"
#include "spectralflow/summation.hpp"

namespace spectralflow {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double_tok(std::string_view token, const char* what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError(std::string("reference file: bad ") + what + " '" +
                      std::string(token) + "'");
  }
  return v;
}

// Triplet accumulator that emits sorted CSR rows.
struct RowBuilder {
  std::vector<std::pair<int, double>> entries;

  void add(int col, double v) { entries.emplace_back(col, v); }

  void flush(CsrMatrix& m) {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (k > 0 && entries[k].first == m.col.back()) {
        m.val.back() += entries[k].second;
      } else {
        m.col.push_back(entries[k].first);
        m.val.push_back(entries[k].second);
      }
    }
    m.row_ptr.push_back(static_cast<int>(m.col.size()));
    entries.clear();
  }
};

double dot_vec(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_vec(std::span<const double> a) { return std::sqrt(dot_vec(a, a)); }

// Preconditioned CG for (K_W - shift*D) y = b, Jacobi preconditioner.
void pcg_solve(const CsrMatrix& k, std::span<const double> mass, double shift,
               std::span<const double> b, std::vector<double>& y, double rel_tol,
               int max_iter) {
  const int n = k.n;
  std::vector<double> r(n), z(n), p(n), ap(n), inv_diag(n);
  for (int i = 0; i < n; ++i) {
    double diag = 0.0;
    for (int e = k.row_ptr[i]; e < k.row_ptr[i + 1]; ++e) {
      if (k.col[e] == i) diag = k.val[e];
    }
    inv_diag[i] = 1.0 / (diag - shift * mass[i]);
  }
  const auto apply = [&](std::span<const double> x, std::span<double> out) {
    k.multiply(x, out);
    for (int i = 0; i < n; ++i) out[i] -= shift * mass[i] * x[i];
  };
  const double nb = norm_vec(b);
  if (nb == 0.0) {
    std::fill(y.begin(), y.end(), 0.0);
    return;
  }
  apply(y, ap);
  for (int i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot_vec(r, z);
  for (int it = 0; it < max_iter; ++it) {
    if (norm_vec(r) <= rel_tol * nb) return;
    apply(p, ap);
    const double pap = dot_vec(p, ap);
    if (pap <= 0.0) {
      throw SolverError("cg: matrix lost positive definiteness");
    }
    const double alpha = rz / pap;
    for (int i = 0; i < n; ++i) {
      y[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot_vec(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (norm_vec(r) > rel_tol * nb) {
    throw SolverError("cg: no convergence within iteration cap");
  }
}

ReferenceSolution solve_operator(const FdOperator& op, double w_min,
                                 const EigenSolveOptions& opts) {
  const int n = op.nodes();
  const double shift = w_min - 1.0;
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> y = x, rhs(n), ky(n), res(n);
  double lambda = 0.0, residual = 0.0;
  bool converged = false;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    op.stiffness.multiply(x, ky);
    double num = dot_vec(x, ky);
    double den = 0.0;
    for (int i = 0; i < n; ++i) den += op.mass[i] * x[i] * x[i];
    lambda = num / den;
    for (int i = 0; i < n; ++i) res[i] = ky[i] / op.mass[i] - lambda * x[i];
    residual = norm_vec(res) / norm_vec(x);
    if (residual <= opts.tol) {
      converged = true;
      break;
    }
    for (int i = 0; i < n; ++i) rhs[i] = op.mass[i] * x[i];
    pcg_solve(op.stiffness, op.mass, shift, rhs, y, opts.cg_tol, opts.cg_max_iter);
    const double ny = norm_vec(y);
    if (ny == 0.0) throw SolverError("eigensolver: inverse iterate vanished");
    for (int i = 0; i < n; ++i) x[i] = y[i] / ny;
  }
  if (!converged) {
    throw SolverError("eigensolver: residual " + std::to_string(residual) +
                      " above tolerance after max iterations");
  }
  ReferenceSolution sol;
  sol.grid_n = op.grid_n;
  sol.dim = op.dim;
  sol.lambda = lambda;
  sol.residual = residual;
  sol.u = std::move(x);
  // L2 normalization with the grid mass (trapezoid weights h^dim * D).
  const double h_pow = std::pow(1.0 / op.grid_n, op.dim);
  double mass_norm2 = 0.0, mean = 0.0;
  for (int i = 0; i < n; ++i) {
    mass_norm2 += h_pow * op.mass[i] * sol.u[i] * sol.u[i];
    mean += op.mass[i] * sol.u[i];
  }
  const double scale = (mean < 0.0 ? -1.0 : 1.0) / std::sqrt(mass_norm2);
  for (double& v : sol.u) v *= scale;
  return sol;
}

double potential_min_on_grid(const PotentialSpec& W, int grid_n, int dim) {
  const double h = 1.0 / grid_n;
  double w_min = 0.0;
  bool first = true;
  std::vector<double> xbuf(std::max(dim, W.min_dim()), 0.0);
  const int nodes = grid_n + 1;
  const int total = dim == 1 ? nodes : nodes * nodes;
  for (int flat = 0; flat < total; ++flat) {
    if (dim == 1) {
      xbuf[0] = flat * h;
    } else {
      xbuf[0] = (flat / nodes) * h;
      xbuf[1] = (flat % nodes) * h;
    }
    const double w = eval_potential(W, std::span<const double>(xbuf).first(
                                           std::max(dim, W.min_dim())));
    w_min = first ? w : std::min(w_min, w);
    first = false;
  }
  return w_min;
}

}  // namespace

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += val[e] * x[col[e]];
    y[i] = s;
  }
}

void FdOperator::apply(std::span<const double> x, std::span<double> y) const {
  stiffness.multiply(x, y);
  for (int i = 0; i < stiffness.n; ++i) y[i] /= mass[i];
}

FdOperator assemble_fd_1d(const PotentialSpec& W, int grid_n) {
  if (grid_n < 2 || grid_n > 512) {
    throw ConfigError("assemble_fd_1d: need 2 <= grid_n <= 512");
  }
  const int nodes = grid_n + 1;
  const double h = 1.0 / grid_n;
  const double inv_h2 = 1.0 / (h * h);
  FdOperator op;
  op.grid_n = grid_n;
  op.dim = 1;
  op.mass.resize(nodes);
  op.stiffness.n = nodes;
  op.stiffness.row_ptr.push_back(0);
  RowBuilder row;
  std::vector<double> xbuf(std::max(1, W.min_dim()), 0.0);
  for (int i = 0; i < nodes; ++i) {
    const double c = (i == 0 || i == grid_n) ? 0.5 : 1.0;
    op.mass[i] = c;
    double diag = 0.0;
    if (i > 0) {
      row.add(i - 1, -inv_h2);
      diag += inv_h2;
    }
    if (i < grid_n) {
      row.add(i + 1, -inv_h2);
      diag += inv_h2;
    }
    xbuf[0] = i * h;
    diag += c * eval_potential(W, xbuf);
    row.add(i, diag);
    row.flush(op.stiffness);
  }
  return op;
}

FdOperator assemble_fd(const PotentialSpec& W, int grid_n) {
  if (grid_n < 8 || grid_n > 512) {
    throw ConfigError("assemble_fd: need 8 <= grid_n <= 512");
  }
  const int nodes = grid_n + 1;
  const double h = 1.0 / grid_n;
  const double inv_h2 = 1.0 / (h * h);
  FdOperator op;
  op.grid_n = grid_n;
  op.dim = 2;
  op.mass.resize(static_cast<std::size_t>(nodes) * nodes);
  op.stiffness.n = nodes * nodes;
  op.stiffness.row_ptr.push_back(0);
  RowBuilder row;
  const auto edge_factor = [&](int idx) {
    return (idx == 0 || idx == grid_n) ? 0.5 : 1.0;
  };
  std::vector<double> xbuf(2, 0.0);
  for (int i = 0; i < nodes; ++i) {
    const double ci = edge_factor(i);
    for (int j = 0; j < nodes; ++j) {
      const double cj = edge_factor(j);
      const int flat = i * nodes + j;
      op.mass[flat] = ci * cj;
      double diag = 0.0;
      // x1-direction edges carry the transverse factor cj, x2 edges carry ci.
      if (i > 0) {
        row.add(flat - nodes, -cj * inv_h2);
        diag += cj * inv_h2;
      }
      if (i < grid_n) {
        row.add(flat + nodes, -cj * inv_h2);
        diag += cj * inv_h2;
      }
      if (j > 0) {
        row.add(flat - 1, -ci * inv_h2);
        diag += ci * inv_h2;
      }
      if (j < grid_n) {
        row.add(flat + 1, -ci * inv_h2);
        diag += ci * inv_h2;
      }
      xbuf[0] = i * h;
      xbuf[1] = j * h;
      diag += ci * cj * eval_potential(W, xbuf);
      row.add(flat, diag);
      row.flush(op.stiffness);
    }
  }
  return op;
}

ReferenceSolution ground_eigenpair(const PotentialSpec& W, int grid_n,
                                   const EigenSolveOptions& opts) {
  const FdOperator op = assemble_fd(W, grid_n);
  const double w_min = potential_min_on_grid(W, grid_n, 2);
  return solve_operator(op, w_min, opts);
}

ReferenceEvaluator::ReferenceEvaluator(const ReferenceSolution& sol, int d)
    : d_(d), grid_n_(sol.grid_n), lambda_(sol.lambda), u_(sol.u) {
  if (sol.dim != 2) throw ConfigError("ReferenceEvaluator: need a 2D solution");
  if (d < 2) throw ConfigError("ReferenceEvaluator: need d >= 2");
  const std::size_t expect =
      static_cast<std::size_t>(grid_n_ + 1) * (grid_n_ + 1);
  if (u_.size() != expect) throw ConfigError("ReferenceEvaluator: bad grid data");
}

double ReferenceEvaluator::value(std::span<const double> x) const {
  const int nodes = grid_n_ + 1;
  const double sx = std::clamp(x[0], 0.0, 1.0) * grid_n_;
  const double sy = std::clamp(x[1], 0.0, 1.0) * grid_n_;
  const int i = std::min(static_cast<int>(sx), grid_n_ - 1);
  const int j = std::min(static_cast<int>(sy), grid_n_ - 1);
  const double fs = sx - i, ft = sy - j;
  const double u00 = u_[static_cast<std::size_t>(i) * nodes + j];
  const double u10 = u_[static_cast<std::size_t>(i + 1) * nodes + j];
  const double u01 = u_[static_cast<std::size_t>(i) * nodes + j + 1];
  const double u11 = u_[static_cast<std::size_t>(i + 1) * nodes + j + 1];
  return (1 - fs) * (1 - ft) * u00 + fs * (1 - ft) * u10 + (1 - fs) * ft * u01 +
         fs * ft * u11;
}

void ReferenceEvaluator::gradient(std::span<const double> x, std::span<double> out) const {
  const int nodes = grid_n_ + 1;
  const double sx = std::clamp(x[0], 0.0, 1.0) * grid_n_;
  const double sy = std::clamp(x[1], 0.0, 1.0) * grid_n_;
  const int i = std::min(static_cast<int>(sx), grid_n_ - 1);
  const int j = std::min(static_cast<int>(sy), grid_n_ - 1);
  const double fs = sx - i, ft = sy - j;
  const double u00 = u_[static_cast<std::size_t>(i) * nodes + j];
  const double u10 = u_[static_cast<std::size_t>(i + 1) * nodes + j];
  const double u01 = u_[static_cast<std::size_t>(i) * nodes + j + 1];
  const double u11 = u_[static_cast<std::size_t>(i + 1) * nodes + j + 1];
  std::fill(out.begin(), out.end(), 0.0);
  out[0] = grid_n_ * ((1 - ft) * (u10 - u00) + ft * (u11 - u01));
  out[1] = grid_n_ * ((1 - fs) * (u01 - u00) + fs * (u11 - u10));
}

double l2_error(const FieldEvaluator& u, const FieldEvaluator& ref,
                const QuadratureSet& q) {
  const int n = q.size();
  std::vector<double> minus(n), plus(n);
  for (int j = 0; j < n; ++j) {
    const auto x = q.point(j);
    const double a = u.value(x);
    const double b = ref.value(x);
    minus[j] = q.weights[j] * (a - b) * (a - b);
    plus[j] = q.weights[j] * (a + b) * (a + b);
  }
  return std::sqrt(std::min(pairwise_sum(minus), pairwise_sum(plus)));
}

RichardsonResult richardson(double coarse, double medium, double fine) {
  RichardsonResult out;
  const double d1 = coarse - medium;
  const double d2 = medium - fine;
  const double tiny = 1e-12 * std::max(1.0, std::abs(fine));
  if (std::abs(d1) <= tiny || std::abs(d2) <= tiny || d1 / d2 <= 0.0) {
    out.degenerate = true;
    out.extrapolated = fine;
    return out;
  }
  out.order = std::log2(d1 / d2);
  // fine = limit + C h^p and medium - fine = C h^p (2^p - 1), so the limit
  // sits below fine by d2 / (2^p - 1) when the sequence decreases.
  out.extrapolated = fine - d2 / (std::exp2(out.order) - 1.0);
  return out;
}

std::string serialize_reference(const ReferenceSolution& sol) {
  std::string out = "spectralflow.reference.v1\n";
  out += "grid_n " + std::to_string(sol.grid_n) + "\n";
  out += "dim " + std::to_string(sol.dim) + "\n";
  out += "lambda " + format_double(sol.lambda) + "\n";
  out += "residual " + format_double(sol.residual) + "\n";
  out += "values " + std::to_string(sol.u.size()) + "\n";
  for (double v : sol.u) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

ReferenceSolution parse_reference(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "spectralflow.reference.v1") {
    throw ConfigError("reference file: missing or unsupported version header");
  }
  ReferenceSolution sol;
  std::size_t count = 0;
  for (const char* key : {"grid_n", "dim", "lambda", "residual", "values"}) {
    if (!std::getline(in, line)) throw ConfigError("reference file: truncated header");
    std::istringstream ls(line);
    std::string name, value;
    ls >> name >> value;
    if (name != key || value.empty()) {
      throw ConfigError("reference file: expected '" + std::string(key) + "' line");
    }
    const double v = parse_double_tok(value, key);
    if (std::string(key) == "grid_n") {
      sol.grid_n = static_cast<int>(v);
    } else if (std::string(key) == "dim") {
      sol.dim = static_cast<int>(v);
    } else if (std::string(key) == "lambda") {
      sol.lambda = v;
    } else if (std::string(key) == "residual") {
      sol.residual = v;
    } else {
      count = static_cast<std::size_t>(v);
    }
  }
  sol.u.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw ConfigError("reference file: expected " + std::to_string(count) +
                        " values, got " + std::to_string(i));
    }
    sol.u.push_back(parse_double_tok(line, "value"));
  }
  return sol;
}

}  // namespace spectralflow
