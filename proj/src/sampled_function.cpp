#include "datko/sampled_function.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <variant>

namespace datko {

namespace {

struct ClosedForm {
  std::vector<Expr> components;
};

struct Samples {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
};

struct Callable {
  std::function<Eigen::VectorXd(double)> fn;
};

struct Cut {
  EvolutionFamily family;
  double cut_time;
  SampledFunction base;
  Eigen::VectorXd value_at_cut;
};

struct Linear {
  double a;
  SampledFunction u;
  double b;
  std::optional<SampledFunction> v;
};

}  // namespace

struct SampledFunction::Node {
  int dimension;
  double domain_end;
  std::variant<ClosedForm, Samples, Callable, Cut, Linear> rep;
};

SampledFunction SampledFunction::closed_form(std::vector<Expr> components, double domain_end) {
  if (components.empty()) throw std::invalid_argument("closed_form: no components");
  const int n = static_cast<int>(components.size());
  return SampledFunction(
      std::make_shared<const Node>(Node{n, domain_end, ClosedForm{std::move(components)}}));
}

SampledFunction SampledFunction::constant(const Eigen::VectorXd& value, double domain_end) {
  std::vector<Expr> comps;
  for (Eigen::Index i = 0; i < value.size(); ++i) comps.push_back(Expr::constant(value(i)));
  return closed_form(std::move(comps), domain_end);
}

SampledFunction SampledFunction::samples(std::vector<double> times,
                                         std::vector<Eigen::VectorXd> values) {
  if (times.empty() || times.size() != values.size()) {
    throw std::invalid_argument("samples: need matching non-empty time and value lists");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("samples: times must increase");
    if (values[i].size() != values[0].size()) throw std::invalid_argument("samples: ragged values");
  }
  const int n = static_cast<int>(values[0].size());
  const double end = times.back();
  return SampledFunction(
      std::make_shared<const Node>(Node{n, end, Samples{std::move(times), std::move(values)}}));
}

SampledFunction SampledFunction::callable(int dimension, std::function<Eigen::VectorXd(double)> fn,
                                          double domain_end) {
  return SampledFunction(
      std::make_shared<const Node>(Node{dimension, domain_end, Callable{std::move(fn)}}));
}

SampledFunction SampledFunction::cut(const EvolutionFamily& family, double cut_time,
                                     const SampledFunction& base) {
  if (base.dimension() != family.dimension()) {
    throw std::invalid_argument("cut: function and family dimensions differ");
  }
  if (cut_time > base.domain_end()) {
    throw std::invalid_argument("cut: cut time beyond the function's domain");
  }
  Eigen::VectorXd at_cut = base(cut_time);
  const double end = std::min(base.domain_end(), family.valid_until());
  return SampledFunction(std::make_shared<const Node>(
      Node{base.dimension(), std::max(end, cut_time),
           Cut{family, cut_time, base, std::move(at_cut)}}));
}

Eigen::VectorXd SampledFunction::operator()(double t) const {
  const Node& n = *node_;
  if (!(t >= 0.0) || t > n.domain_end) {
    throw std::domain_error("sampled function evaluated at t = " + std::to_string(t) +
                            " outside [0, " + std::to_string(n.domain_end) + "]");
  }
  return std::visit(
      [&](const auto& rep) -> Eigen::VectorXd {
        using R = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<R, ClosedForm>) {
          Eigen::VectorXd out(n.dimension);
          for (int i = 0; i < n.dimension; ++i) out(i) = rep.components[i](t);
          return out;
        } else if constexpr (std::is_same_v<R, Samples>) {
          const auto& ts = rep.times;
          if (t <= ts.front()) return rep.values.front();
          const auto it = std::upper_bound(ts.begin(), ts.end(), t);
          if (it == ts.end()) return rep.values.back();
          const auto i = static_cast<std::size_t>(it - ts.begin());
          const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
          return (1.0 - w) * rep.values[i - 1] + w * rep.values[i];
        } else if constexpr (std::is_same_v<R, Callable>) {
          return rep.fn(t);
        } else if constexpr (std::is_same_v<R, Cut>) {
          if (t < rep.cut_time) return rep.base(t);
          return apply(rep.family, t, rep.cut_time, rep.value_at_cut);
        } else {
          Eigen::VectorXd out = rep.a * rep.u(t);
          if (rep.v.has_value()) out += rep.b * (*rep.v)(t);
          return out;
        }
      },
      n.rep);
}

int SampledFunction::dimension() const { return node_->dimension; }

double SampledFunction::domain_end() const { return node_->domain_end; }

std::optional<double> SampledFunction::cut_time() const {
  if (const auto* c = std::get_if<Cut>(&node_->rep)) return c->cut_time;
  return std::nullopt;
}

SampledFunction operator+(const SampledFunction& a, const SampledFunction& b) {
  if (a.dimension() != b.dimension()) throw std::invalid_argument("sum of functions: dimensions differ");
  return SampledFunction(std::make_shared<const SampledFunction::Node>(SampledFunction::Node{
      a.dimension(), std::min(a.domain_end(), b.domain_end()), Linear{1.0, a, 1.0, b}}));
}

SampledFunction operator*(double c, const SampledFunction& u) {
  return SampledFunction(std::make_shared<const SampledFunction::Node>(
      SampledFunction::Node{u.dimension(), u.domain_end(), Linear{c, u, 0.0, std::nullopt}}));
}

}  // namespace datko
