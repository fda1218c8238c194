#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <chrono>

#include "lambdapack/analysis/analyzer.hpp"
#include "lambdapack/error.hpp"
#include "lambdapack/harness/faults.hpp"
#include "lambdapack/harness/programs.hpp"
#include "lambdapack/harness/run.hpp"
#include "lambdapack/lang/enumerate.hpp"
#include "lambdapack/lang/parser.hpp"
#include "lambdapack/provisioner/provisioner.hpp"

namespace py = pybind11;
namespace lp = lambdapack;
using lp::lang::Binding;
using lp::lang::NodeRef;

namespace {

// Nodes cross the boundary in their text form, `line:var=val,...`.
std::vector<std::string> node_strings(const std::vector<NodeRef>& nodes) {
  std::vector<std::string> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.to_string());
  return out;
}

std::pair<lp::lang::Program, Binding> load(const std::string& source, const Binding& params) {
  auto p = lp::lang::parse_program(source);
  auto bound = lp::lang::resolve_params(p, params);
  return {std::move(p), std::move(bound)};
}

lp::control_plane::Duration secs(double s) {
  return std::chrono::duration_cast<lp::control_plane::Duration>(std::chrono::duration<double>(s));
}

class PyAnalyzer {
 public:
  PyAnalyzer(const std::string& source, const Binding& params) : analyzer_(make(source, params)) {}

  std::vector<std::string> children(const std::string& node) const {
    return node_strings(analyzer_.children_of(NodeRef::parse(node)));
  }
  std::vector<std::string> parents(const std::string& node) const {
    return node_strings(analyzer_.parents_of(NodeRef::parse(node)));
  }
  std::vector<std::string> readers(const std::string& matrix, const std::vector<std::int64_t>& idx) const {
    return node_strings(analyzer_.find_readers(matrix, idx));
  }
  bool is_node(const std::string& node) const {
    const auto n = NodeRef::parse(node);
    return n.line >= 0 && n.line < static_cast<int>(analyzer_.lines().size()) &&
           analyzer_.verify_binding(n.line, n.binding);
  }
  const Binding& params() const { return analyzer_.params(); }

 private:
  static lp::analysis::Analyzer make(const std::string& source, const Binding& params) {
    auto [p, bound] = load(source, params);
    return lp::analysis::Analyzer(std::move(p), std::move(bound));
  }
  lp::analysis::Analyzer analyzer_;
};

lp::harness::WorkloadKind workload_kind(const std::string& name) {
  if (name == "cholesky") return lp::harness::WorkloadKind::Cholesky;
  if (name == "tsqr") return lp::harness::WorkloadKind::Tsqr;
  if (name == "gemm") return lp::harness::WorkloadKind::Gemm;
  throw lp::Error("unknown workload '" + name + "' (cholesky, tsqr, gemm)");
}

py::array_t<double> to_numpy(const lp::Tile& t) {
  py::array_t<double> a({t.rows(), t.cols()});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t.row(r)[c];
  return a;
}

py::dict run(const std::string& workload, std::size_t block, std::int64_t grid, std::size_t size, std::size_t inner,
             std::int64_t leaves, std::size_t rows, std::size_t cols, std::optional<std::int64_t> workers,
             std::optional<std::string> sf, double period, double startup_latency, std::int64_t max_workers,
             int pipeline, double lease, double compute_delay, double idle_timeout,
             const std::vector<std::string>& faults, std::uint64_t seed, bool check, const std::string& backend,
             std::optional<std::filesystem::path> root, std::optional<std::filesystem::path> metrics_dir,
             double max_wall) {
  lp::harness::RunConfig cfg;
  auto& w = cfg.workload;
  w.kind = workload_kind(workload);
  w.block = block;
  w.grid = grid;
  w.size = size;
  w.inner = inner;
  w.leaves = leaves;
  w.rows = rows;
  w.cols = cols;
  if (sf && workers) throw lp::Error("pass either workers or sf, not both");
  if (sf) {
    cfg.fixed_workers.reset();
    cfg.policy.sf = lp::provisioner::parse_fraction(*sf);
  } else {
    cfg.fixed_workers = workers.value_or(4);
  }
  cfg.policy.period = secs(period);
  cfg.policy.startup_latency = secs(startup_latency);
  cfg.policy.max_workers = max_workers;
  cfg.policy.pipeline_width = pipeline;
  cfg.worker.pipeline_width = pipeline;
  cfg.worker.lease_length = secs(lease);
  cfg.worker.compute_delay = secs(compute_delay);
  cfg.worker.idle_timeout = secs(idle_timeout);
  cfg.faults = lp::harness::parse_faults(faults);
  cfg.seed = seed;
  cfg.check = check;
  if (backend == "fs") {
    if (!root) throw lp::Error("backend 'fs' needs root");
    cfg.backend = lp::store::Backend::Filesystem;
    cfg.store_root = *root;
  } else if (backend != "mem") {
    throw lp::Error("backend must be 'mem' or 'fs'");
  }
  cfg.metrics_dir = metrics_dir;
  cfg.max_wall = secs(max_wall);

  lp::harness::RunResult r;
  {
    py::gil_scoped_release release;
    r = lp::harness::run(cfg);
  }
  py::dict d;
  d["status"] = lp::harness::to_string(r.status);
  d["exit_code"] = lp::harness::exit_code(r.status);
  d["message"] = r.message;
  d["description"] = r.description;
  d["nodes"] = r.nodes;
  d["completed"] = r.completed_in_state;
  d["task_executions"] = r.task_executions;
  d["completion_time"] = r.completion_time;
  d["core_seconds"] = r.core_seconds;
  d["worker_seconds"] = r.worker_seconds;
  d["bytes_read"] = r.bytes_read;
  d["bytes_written"] = r.bytes_written;
  d["check_error"] = r.check ? py::cast(r.check->error) : py::none();
  d["check_ok"] = r.check ? py::cast(r.check->ok) : py::none();
  py::list recoveries;
  for (const auto& rec : r.recoveries) {
    py::dict e;
    e["at"] = rec.at;
    e["before"] = rec.before;
    e["killed"] = rec.killed;
    e["restored_after"] = rec.restored_after ? py::cast(*rec.restored_after) : py::none();
    recoveries.append(e);
  }
  d["recoveries"] = recoveries;
  d["output"] = to_numpy(r.output);
  return d;
}

}  // namespace

PYBIND11_MODULE(_lambdapack, m) {
  m.doc() = "Serverless linear algebra: DSL analysis, runtime and autoscaling policy";

  py::register_exception<lp::Error>(m, "Error", PyExc_ValueError);

  m.def("builtin_names", &lp::harness::builtin_names);
  m.def(
      "builtin_source", [](const std::string& name, const Binding& params) { return lp::harness::builtin_source(name, params); },
      py::arg("name"), py::arg("params") = Binding{});

  m.def(
      "program_info",
      [](const std::string& source) {
        const auto p = lp::lang::parse_program(source);
        py::dict d;
        d["name"] = p.name;
        d["lines"] = p.num_lines;
        py::dict params;
        for (const auto& [k, v] : lp::lang::resolve_params(p, {})) params[py::str(k)] = v;
        d["params"] = params;
        d["canonical"] = lp::lang::print_program(p);
        return d;
      },
      py::arg("source"), "Parse a program; returns its name, line count, default params and canonical text.");

  m.def(
      "validate",
      [](const std::string& source, const Binding& params) {
        auto [p, bound] = load(source, params);
        py::list violations;
        for (const auto& v : lp::lang::validate_ssa(p, bound)) violations.append(py::make_tuple(v.tile.to_string(), node_strings(v.writers)));
        py::dict d;
        d["ok"] = violations.empty();
        d["violations"] = violations;
        d["nodes"] = lp::lang::enumerate_nodes(p, bound).size();
        return d;
      },
      py::arg("source"), py::arg("params") = Binding{},
      "Check single assignment; raises Error on syntax or binding errors.");

  m.def(
      "enumerate_nodes",
      [](const std::string& source, const Binding& params) {
        auto [p, bound] = load(source, params);
        return node_strings(lp::lang::enumerate_nodes(p, bound));
      },
      py::arg("source"), py::arg("params") = Binding{});
  m.def(
      "enumerate_edges",
      [](const std::string& source, const Binding& params) {
        auto [p, bound] = load(source, params);
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& e : lp::lang::enumerate_edges(p, bound)) out.emplace_back(e.from.to_string(), e.to.to_string());
        return out;
      },
      py::arg("source"), py::arg("params") = Binding{});

  m.def(
      "parse_node",
      [](const std::string& text) {
        auto n = NodeRef::parse(text);
        return py::make_tuple(n.line, n.binding);
      },
      py::arg("text"));
  m.def(
      "format_node", [](int line, const Binding& b) { return NodeRef{line, b}.to_string(); }, py::arg("line"),
      py::arg("binding"));

  py::class_<PyAnalyzer>(m, "Analyzer", "Implicit dependency analysis; nodes are `line:var=val,...` strings.")
      .def(py::init<const std::string&, const Binding&>(), py::arg("source"), py::arg("params") = Binding{})
      .def("children", &PyAnalyzer::children, py::arg("node"))
      .def("parents", &PyAnalyzer::parents, py::arg("node"))
      .def("readers", &PyAnalyzer::readers, py::arg("matrix"), py::arg("index"))
      .def("is_node", &PyAnalyzer::is_node, py::arg("node"))
      .def_property_readonly("params", &PyAnalyzer::params);

  m.def(
      "desired_launches",
      [](std::int64_t pending, std::int64_t running, std::int64_t booting, const std::string& sf, int pipeline_width,
         std::int64_t max_workers) {
        lp::provisioner::ScalingPolicy p;
        p.sf = lp::provisioner::parse_fraction(sf);
        p.pipeline_width = pipeline_width;
        p.max_workers = max_workers;
        return lp::provisioner::desired_launches(pending, running, booting, p);
      },
      py::arg("pending"), py::arg("running"), py::arg("booting"), py::arg("sf") = "1/2", py::arg("pipeline_width") = 1,
      py::arg("max_workers") = 1024);

  m.def("run", &run, py::arg("workload") = "cholesky", py::arg("block") = 64, py::arg("grid") = 0,
        py::arg("size") = 0, py::arg("inner") = 0, py::arg("leaves") = 4, py::arg("rows") = 0, py::arg("cols") = 8,
        py::arg("workers") = py::none(), py::arg("sf") = py::none(), py::arg("period") = 1.0,
        py::arg("startup_latency") = 0.0, py::arg("max_workers") = 1024, py::arg("pipeline") = 1,
        py::arg("lease") = 10.0, py::arg("compute_delay") = 0.0, py::arg("idle_timeout") = 10.0,
        py::arg("faults") = std::vector<std::string>{}, py::arg("seed") = 1, py::arg("check") = true,
        py::arg("backend") = "mem", py::arg("root") = py::none(), py::arg("metrics_dir") = py::none(),
        py::arg("max_wall") = 300.0,
        "Run a builtin workload on a local worker pool and return a summary dict (output as a numpy array).");
}
