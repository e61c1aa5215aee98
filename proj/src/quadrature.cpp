#include "volbound/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace volbound::quad {

namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel kronrod15(const Integrand& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double fsum = f(center - dx) + f(center + dx);
    kronrod += kWgk[j] * fsum;
    if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

struct SimpsonCtx {
  const Integrand& f;
  double rel_tol;
  double abs_tol;
  int evaluations = 0;
};

double simpson_recurse(SimpsonCtx& ctx, double a, double b, double fa, double fm, double fb,
                       double whole, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = ctx.f(lm);
  const double frm = ctx.f(rm);
  ctx.evaluations += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double both = left + right;
  const double diff = both - whole;
  if (depth <= 0 || std::abs(diff) <= std::max(ctx.abs_tol, ctx.rel_tol * std::abs(both))) {
    return both + diff / 15.0;
  }
  return simpson_recurse(ctx, a, m, fa, flm, fm, left, depth - 1) +
         simpson_recurse(ctx, m, b, fm, frm, fb, right, depth - 1);
}

}  // namespace

QuadResult gauss_kronrod(const Integrand& f, double a, double b, double rel_tol, double abs_tol,
                         int max_intervals) {
  if (a == b) return {};
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::priority_queue<Panel> panels;
  Panel first = kronrod15(f, a, b);
  double total = first.value;
  double error = first.error;
  panels.push(first);
  int evaluations = 15;
  while (error > std::max(abs_tol, rel_tol * std::abs(total)) &&
         static_cast<int>(panels.size()) < max_intervals) {
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Panel left = kronrod15(f, worst.a, mid);
    const Panel right = kronrod15(f, mid, worst.b);
    evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to shed the drift of the running update.
  double resummed = 0.0;
  double err = 0.0;
  while (!panels.empty()) {
    resummed += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  return {sign * resummed, err, evaluations};
}

QuadResult adaptive_simpson(const Integrand& f, double a, double b, double rel_tol,
                            double abs_tol, int max_depth) {
  if (a == b) return {};
  SimpsonCtx ctx{f, rel_tol, abs_tol};
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  ctx.evaluations = 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double value = simpson_recurse(ctx, a, b, fa, fm, fb, whole, max_depth);
  return {value, 0.0, ctx.evaluations};
}

}  // namespace volbound::quad
