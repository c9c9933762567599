#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "ksel/common.hpp"
#include "ksel/kernels.hpp"

namespace ksel {

// Observation table for the selection model.  Outcomes are stored only through
// the product sy = s*y with unselected entries exactly zero, so downstream code
// can never touch an unobserved outcome.
struct Dataset {
  VectorXd s;   // selection indicator, each entry exactly 0 or 1
  VectorXd sy;  // s .* y; 0 wherever s == 0
  VectorXd d;   // treatment (scalar)
  MatrixXd x;   // baseline covariates, n x px
  MatrixXd m;   // follow-up covariates, n x pm (0 columns when absent)
  MatrixXd v;   // subgroup covariates, n x pv (0 columns when absent)

  Index n() const { return s.size(); }
  bool has_m() const { return m.cols() > 0; }
  bool has_v() const { return v.cols() > 0; }

  // Validates shapes and content and applies the sy convention.  y entries on
  // unselected rows may hold anything (including NaN); they are discarded.
  static Dataset make(VectorXd s, const VectorXd& y, VectorXd d, MatrixXd x, MatrixXd m = {},
                      MatrixXd v = {}) {
    const Index n = s.size();
    if (n < 1) throw InputError("Dataset: need at least one row");
    if (y.size() != n || d.size() != n || x.rows() != n)
      throw InputError("Dataset: column lengths disagree");
    if (x.cols() < 1) throw InputError("Dataset: X must have at least one column");
    if (m.size() > 0 && m.rows() != n) throw InputError("Dataset: M row count disagrees");
    if (v.size() > 0 && v.rows() != n) throw InputError("Dataset: V row count disagrees");
    Dataset out;
    out.sy = VectorXd::Zero(n);
    for (Index i = 0; i < n; ++i) {
      if (s[i] != 0.0 && s[i] != 1.0)
        throw InputError("Dataset: selection column must be exactly 0 or 1 (row " + std::to_string(i) + ")");
      if (s[i] == 1.0) {
        if (!std::isfinite(y[i]))
          throw InputError("Dataset: outcome missing or non-finite on a selected row (row " + std::to_string(i) + ")");
        out.sy[i] = y[i];
      }
      if (!std::isfinite(d[i])) throw InputError("Dataset: non-finite treatment (row " + std::to_string(i) + ")");
    }
    if (!x.allFinite()) throw InputError("Dataset: non-finite covariate in X");
    if (m.size() > 0 && !m.allFinite()) throw InputError("Dataset: non-finite covariate in M");
    if (v.size() > 0 && !v.allFinite()) throw InputError("Dataset: non-finite covariate in V");
    out.s = std::move(s);
    out.d = std::move(d);
    out.x = std::move(x);
    out.m = std::move(m);
    out.v = std::move(v);
    return out;
  }

  // Row subset in the given order (used by cross-fitting).
  Dataset rows(const std::vector<Index>& idx) const {
    Dataset out;
    const Index k = static_cast<Index>(idx.size());
    if (k < 1) throw InputError("Dataset::rows: empty selection");
    out.s.resize(k);
    out.sy.resize(k);
    out.d.resize(k);
    out.x.resize(k, x.cols());
    if (has_m()) out.m.resize(k, m.cols());
    if (has_v()) out.v.resize(k, v.cols());
    for (Index r = 0; r < k; ++r) {
      const Index i = idx[static_cast<std::size_t>(r)];
      if (i < 0 || i >= n()) throw InputError("Dataset::rows: index out of range");
      out.s[r] = s[i];
      out.sy[r] = sy[i];
      out.d[r] = d[i];
      out.x.row(r) = x.row(i);
      if (has_m()) out.m.row(r) = m.row(i);
      if (has_v()) out.v.row(r) = v.row(i);
    }
    return out;
  }

  // Outcome values on selected rows only (e.g. for outcome-kernel lengthscales).
  VectorXd y_selected() const {
    const Index k = static_cast<Index>(s.sum());
    VectorXd out(k);
    Index r = 0;
    for (Index i = 0; i < n(); ++i)
      if (s[i] == 1.0) out[r++] = sy[i];
    return out;
  }
};

// Unlabelled sample from an alternative population, used by the
// distribution-shift estimands.  Static shift needs x only; the dynamic shift
// needs d, x, m.
struct ShiftedSample {
  MatrixXd x;
  VectorXd d;  // empty for static use
  MatrixXd m;  // empty for static use

  Index n() const { return x.rows(); }
  bool dynamic_complete() const { return d.size() == x.rows() && m.rows() == x.rows() && m.cols() > 0; }
};

// Kernel choice per variable role.
struct KernelSet {
  KernelSpec s = KernelSpec::indicator(1);
  KernelSpec d = KernelSpec::gaussian1d(1.0);
  KernelSpec x = KernelSpec::gaussian1d(1.0);
  std::optional<KernelSpec> m;
  std::optional<KernelSpec> v;
  std::optional<KernelSpec> y;

  // Median-heuristic gaussian kernels on continuous roles, indicator on S and V.
  // The outcome kernel uses selected outcomes only.  treat_indicator switches D
  // to the indicator family for discrete treatments.
  static KernelSet defaults(const Dataset& data, bool treat_indicator = false, std::uint64_t seed = 0) {
    KernelSet k;
    k.s = KernelSpec::indicator(1);
    if (treat_indicator)
      k.d = KernelSpec::indicator(1);
    else
      k.d = KernelSpec::gaussian(median_heuristic(MatrixXd(data.d), 5000, derive_seed(seed, 1)));
    k.x = KernelSpec::gaussian(median_heuristic(data.x, 5000, derive_seed(seed, 2)));
    if (data.has_m())
      k.m = KernelSpec::gaussian(median_heuristic(data.m, 5000, derive_seed(seed, 3)));
    if (data.has_v()) k.v = KernelSpec::indicator(data.v.cols());
    const VectorXd ysel = data.y_selected();
    if (ysel.size() >= 2)
      k.y = KernelSpec::gaussian(median_heuristic(MatrixXd(ysel), 5000, derive_seed(seed, 4)));
    return k;
  }
};

// Cached per-variable Gram matrices on one sample.
struct GramSet {
  MatrixXd ss, dd, xx, mm, vv;

  static GramSet build(const Dataset& data, const KernelSet& k, bool with_m = false,
                       bool with_v = false) {
    GramSet g;
    g.ss = gram(k.s, MatrixXd(data.s));
    g.dd = gram(k.d, MatrixXd(data.d));
    g.xx = gram(k.x, data.x);
    if (with_m) {
      if (!data.has_m() || !k.m) throw InputError("GramSet: M column or kernel missing");
      g.mm = gram(*k.m, data.m);
    }
    if (with_v) {
      if (!data.has_v() || !k.v) throw InputError("GramSet: V column or kernel missing");
      g.vv = gram(*k.v, data.v);
    }
    return g;
  }
};

}  // namespace ksel
