#include "glam/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "glam/arcface.hpp"
#include "glam/attention.hpp"
#include "glam/backbone.hpp"
#include "glam/embedding.hpp"
#include "glam/errors.hpp"
#include "json.hpp"

namespace glam {

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_difference_grad: eps must be positive");
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_grad: non-finite value probing element " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) throw ShapeError("max_relative_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

GradReport check_op(const std::string& op, const GradFn& fn, const std::vector<GradInput>& inputs,
                    double tolerance, double eps, std::uint64_t seed) {
  Tensor weights;
  {
    NoGradGuard guard;
    std::vector<Var> probe;
    for (const GradInput& in : inputs) probe.push_back(Var::constant(in.value));
    const Tensor out = fn(probe).value();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    weights = Tensor(out.shape());
    for (double& w : weights.values()) w = sign(rng) ? mag(rng) : -mag(rng);
  }

  std::vector<Var> leaves;
  for (const GradInput& in : inputs) leaves.push_back(Var::parameter(in.value));
  backward(weighted_sum(fn(leaves), weights));

  GradReport report;
  report.op = op;
  report.tolerance = tolerance;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor& t) {
      NoGradGuard guard;
      std::vector<Var> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        vars.push_back(Var::constant(j == k ? t : inputs[j].value));
      }
      return weighted_sum(fn(vars), weights).value()[0];
    };
    const Tensor numeric = finite_difference_grad(f, inputs[k].value, eps);
    const Tensor analytic = leaves[k].grad().empty() ? Tensor(inputs[k].value.shape(), 0.0) : leaves[k].grad();
    ParamReport p;
    p.name = inputs[k].name;
    p.elements = numeric.size();
    p.max_rel = max_relative_error(analytic, numeric);
    p.max_abs = max_abs_difference(analytic, numeric);
    p.pass = p.max_rel <= tolerance;
    report.max_rel = std::max(report.max_rel, p.max_rel);
    report.max_abs = std::max(report.max_abs, p.max_abs);
    report.params.push_back(std::move(p));
  }
  report.pass = report.max_rel <= tolerance;
  return report;
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = u(rng_);
    return t;
  }
  // Values bounded away from zero, for ops with a kink at the origin.
  Tensor away_from_zero(Shape shape) {
    Tensor t = uniform(std::move(shape), 0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (double& v : t.values()) v = sign(rng_) ? v : -v;
    return t;
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Leaves named `skip` stay fixed and are not checked.
template <class Params>
std::vector<GradInput> named_inputs(Params& params, const std::string& skip = "") {
  std::vector<GradInput> out;
  params.visit([&](const std::string& name, Var& v) {
    if (name != skip) out.push_back({name, v.value()});
  });
  return out;
}

// Copy of `params` whose visited leaves (except `skip`) are vars[offset],
// vars[offset + 1], ...
template <class Params>
Params rebind(const Params& params, const std::vector<Var>& vars, std::size_t offset,
              const std::string& skip = "") {
  Params copy = params;
  copy.visit([&](const std::string& name, Var& v) {
    if (name != skip) v = vars.at(offset++);
  });
  return copy;
}

void add_op_checks(std::vector<GradReport>& out, double tol, Sampler& s) {
  auto run = [&](const std::string& name, const GradFn& fn, std::vector<GradInput> inputs) {
    out.push_back(check_op(name, fn, inputs, tol));
  };
  run("conv2d", [](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2]); },
      {{"input", s.uniform({2, 4, 4})}, {"weight", s.uniform({3, 2, 3, 3})}, {"bias", s.uniform({3})}});
  run("conv2d_dilated_padded",
      [](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], {1, 2, 2}); },
      {{"input", s.uniform({2, 4, 4})}, {"weight", s.uniform({2, 2, 3, 3})}, {"bias", s.uniform({2})}});
  run("conv2d_strided", [](const std::vector<Var>& v) { return conv2d(v[0], v[1], Var(), {2, 1, 1}); },
      {{"input", s.uniform({2, 5, 5})}, {"weight", s.uniform({2, 2, 3, 3})}});
  run("conv2d_pointwise", [](const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2]); },
      {{"input", s.uniform({3, 2, 3})}, {"weight", s.uniform({2, 3, 1, 1})}, {"bias", s.uniform({2})}});
  run("conv1d_same", [](const std::vector<Var>& v) { return conv1d_same(v[0], v[1]); },
      {{"input", s.uniform({5})}, {"kernel", s.uniform({3})}});
  run("gap", [](const std::vector<Var>& v) { return gap(v[0]); }, {{"input", s.uniform({3, 2, 2})}});
  run("sigmoid", [](const std::vector<Var>& v) { return sigmoid(v[0]); }, {{"x", s.uniform({2, 3}, -3, 3)}});
  run("relu", [](const std::vector<Var>& v) { return relu(v[0]); }, {{"x", s.away_from_zero({2, 3})}});
  run("softmax_axis0", [](const std::vector<Var>& v) { return softmax_axis(v[0], 0); },
      {{"x", s.uniform({3, 4}, -2, 2)}});
  run("softmax_axis1", [](const std::vector<Var>& v) { return softmax_axis(v[0], 1); },
      {{"x", s.uniform({3, 4}, -2, 2)}});
  run("matmul", [](const std::vector<Var>& v) { return matmul(v[0], v[1]); },
      {{"a", s.uniform({2, 3})}, {"b", s.uniform({3, 4})}});
  run("transpose", [](const std::vector<Var>& v) { return transpose(v[0]); }, {{"m", s.uniform({2, 3})}});
  run("ewmul_broadcast", [](const std::vector<Var>& v) { return ewmul_broadcast(v[0], v[1]); },
      {{"a", s.uniform({3, 2, 2})}, {"b", s.uniform({3, 1, 1})}});
  run("ewmul_broadcast_rows", [](const std::vector<Var>& v) { return ewmul_broadcast(v[0], v[1]); },
      {{"a", s.uniform({1, 2, 3})}, {"b", s.uniform({4, 2, 1})}});
  run("add", [](const std::vector<Var>& v) { return add(v[0], v[1]); },
      {{"a", s.uniform({2, 3})}, {"b", s.uniform({1, 3})}});
  run("subtract", [](const std::vector<Var>& v) { return subtract(v[0], v[1]); },
      {{"a", s.uniform({2, 3})}, {"b", s.uniform({2, 1})}});
  run("scale", [](const std::vector<Var>& v) { return scale(v[0], -1.75); }, {{"x", s.uniform({4})}});
  run("reshape", [](const std::vector<Var>& v) { return reshape(v[0], {3, 2}); }, {{"x", s.uniform({2, 3})}});
  run("concat", [](const std::vector<Var>& v) { return concat({v[0], v[1]}); },
      {{"a", s.uniform({1, 2, 2})}, {"b", s.uniform({2, 2, 2})}});
  run("pad_replicate", [](const std::vector<Var>& v) { return pad_replicate(v[0], 1); },
      {{"input", s.uniform({2, 2, 3})}});
  run("select", [](const std::vector<Var>& v) { return select(v[0], 2); }, {{"x", s.uniform({4})}});
  run("stack_rows", [](const std::vector<Var>& v) { return stack_rows({v[0], v[1]}); },
      {{"r0", s.uniform({3})}, {"r1", s.uniform({3})}});
  run("sum", [](const std::vector<Var>& v) { return sum(v[0]); }, {{"x", s.uniform({2, 2})}});
  run("l2_normalize_rows", [](const std::vector<Var>& v) { return l2_normalize_rows(v[0]); },
      {{"x", s.uniform({3, 4})}});
}

void add_model_checks(std::vector<GradReport>& out, double tol, Sampler& s) {
  // Attention on c=4, h=w=3 with both branches active.
  AttentionConfig ac;
  ac.channels = 4;
  AttentionParams attention = AttentionParams::init(ac, s.rng());
  {
    std::vector<GradInput> inputs{{"features", s.uniform({4, 3, 3}, 0.0, 1.0)}};
    for (GradInput& g : named_inputs(attention)) inputs.push_back(std::move(g));
    out.push_back(check_op(
        "glam_forward",
        [&](const std::vector<Var>& v) { return glam_graph(v[0], rebind(attention, v, 1)).fused; },
        inputs, tol));
  }

  // Descriptor head on a batch of three c=4 maps, d=4, in both modes.
  HeadParams head = HeadParams::init(4, 4, s.rng(), 0.2, 3.0);
  head.running_mean = s.uniform({4}, -0.2, 0.2);
  head.running_var = s.uniform({4}, 0.5, 1.5);
  for (Mode mode : {Mode::train, Mode::eval}) {
    std::vector<GradInput> inputs;
    for (std::size_t b = 0; b < 3; ++b) {
      inputs.push_back({"features[" + std::to_string(b) + "]", s.uniform({4, 3, 3}, 0.05, 1.0)});
    }
    // Batch statistics cancel the FC bias exactly, so its train-mode gradient
    // is identically zero and has no meaningful relative error.
    const std::string skip = mode == Mode::train ? "head.fc.bias" : "";
    for (GradInput& g : named_inputs(head, skip)) inputs.push_back(std::move(g));
    out.push_back(check_op(
        mode == Mode::train ? "embed_train" : "embed_eval",
        [&head, mode, skip](const std::vector<Var>& v) {
          std::mt19937_64 rng(11);  // same dropout mask on every evaluation
          return embed_batch({v[0], v[1], v[2]}, rebind(head, v, 3, skip), mode, &rng).descriptors;
        },
        inputs, tol));
  }

  // ArcFace on l2-normalized rows, d=4, three classes, batch of three.
  ArcFaceParams arc = ArcFaceParams::init(4, 3, s.rng(), 0.3, 30.0);
  out.push_back(check_op(
      "arcface_loss",
      [&arc](const std::vector<Var>& v) {
        ArcFaceParams p = arc;
        p.weights = v[1];
        const std::size_t labels[] = {0, 2, 1};
        return arcface_loss(l2_normalize_rows(v[0]), labels, p);
      },
      {{"descriptors", s.uniform({3, 4})}, {"class_weights", arc.weights.value()}}, tol));

  // End-to-end over the backbone parameters: backbone -> attention -> head -> ArcFace.
  BackboneParams backbone = BackboneParams::init(s.rng(), {2, 3, 4});
  for (Var& b : backbone.bias) b.mutable_value() = s.uniform(b.shape(), 0.05, 0.2);
  const std::vector<Var> images{Var::constant(s.uniform({3, 12, 12})), Var::constant(s.uniform({3, 12, 12}))};
  out.push_back(check_op(
      "pipeline",
      [&](const std::vector<Var>& v) {
        const BackboneParams bb = rebind(backbone, v, 0);
        std::vector<Var> feats;
        for (const Var& image : images) feats.push_back(glam_graph(tiny_backbone(image, bb), attention).fused);
        const std::size_t labels[] = {1, 0};
        std::mt19937_64 rng(5);
        return arcface_loss(embed_batch(feats, head, Mode::train, &rng).descriptors, labels, arc);
      },
      named_inputs(backbone), tol));
}

}  // namespace

std::vector<GradReport> check_all(double tolerance, std::uint64_t seed) {
  Sampler s(seed);
  std::vector<GradReport> out;
  add_op_checks(out, tolerance, s);
  add_model_checks(out, tolerance, s);
  return out;
}

std::string gradcheck_json(const std::vector<GradReport>& reports) {
  using nlohmann::json;
  json ops = json::array();
  bool all = true;
  for (const GradReport& r : reports) {
    json params = json::array();
    for (const ParamReport& p : r.params) {
      params.push_back({{"name", p.name}, {"elements", p.elements}, {"max_rel", p.max_rel},
                        {"max_abs", p.max_abs}, {"pass", p.pass}});
    }
    ops.push_back({{"op", r.op}, {"max_rel", r.max_rel}, {"max_abs", r.max_abs},
                   {"tolerance", r.tolerance}, {"pass", r.pass}, {"params", params}});
    all = all && r.pass;
  }
  return json{{"pass", all}, {"ops", ops}}.dump(2);
}

std::string gradcheck_table(const std::vector<GradReport>& reports) {
  std::size_t width = 2;
  for (const GradReport& r : reports) width = std::max(width, r.op.size());
  std::ostringstream out;
  char buf[96];
  out << "op" << std::string(width - 2 + 2, ' ') << "   max_rel     max_abs  status\n";
  std::size_t failed = 0;
  for (const GradReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%10.3e  %10.3e  %s", r.max_rel, r.max_abs, r.pass ? "ok" : "FAIL");
    out << r.op << std::string(width - r.op.size() + 2, ' ') << buf << "\n";
    if (!r.pass) {
      ++failed;
      for (const ParamReport& p : r.params) {
        if (!p.pass) {
          std::snprintf(buf, sizeof buf, "%10.3e", p.max_rel);
          out << "  " << p.name << ": " << buf << "\n";
        }
      }
    }
  }
  out << reports.size() - failed << " of " << reports.size() << " ops pass\n";
  return out.str();
}

}  // namespace glam
