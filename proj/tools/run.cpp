#include "run.hpp"

#include <gwmodel/gwmodel.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace gwmodel::cli {

namespace {

std::string sidecar(const std::string& out, const std::string& suffix, const std::string& ext)
{
  const std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

DistanceSpec distance_spec(const RunConfig& c)
{
  if (c.geographic) {
    return DistanceSpec::great_circle(c.earth_radius.value_or(kEarthRadiusMeters));
  }
  return DistanceSpec::minkowski(c.power);
}

DistanceSource make_source(const RunConfig& c, const SpatialDataset& ds)
{
  const DistanceSpec spec = distance_spec(c);
  check(spec);
  if (c.dist_cache.empty()) {
    return DistanceSource::among(ds.coords(), spec);
  }
  if (std::filesystem::exists(c.dist_cache)) {
    DistanceMatrix m = read_distance_cache(c.dist_cache);
    if (m.values.rows() != ds.size() || m.values.cols() != ds.size() || !m.symmetric) {
      throw Error(ErrorCode::InvalidArgument, "distance cache '" + c.dist_cache + "' does not match the input");
    }
    return DistanceSource::from_matrix(std::move(m));
  }
  DistanceMatrix m = dist_matrix(ds.coords(), spec);
  write_distance_cache(c.dist_cache, m);
  return DistanceSource::from_matrix(std::move(m));
}

SpatialDataset load(const RunConfig& c, const std::string& path, std::ostream& err)
{
  if (path.empty()) {
    throw Error(ErrorCode::InvalidArgument, "an input file is required (--input)");
  }
  auto csv = read_csv(path, c.x, c.y, c.geographic);
  for (const auto& d : csv.dropped) {
    err << "warning: non-numeric column '" << d << "' ignored\n";
  }
  validate(csv.data);
  return std::move(csv.data);
}

std::optional<double> fixed_bandwidth(const RunConfig& c)
{
  if (c.bw == "auto") {
    return std::nullopt;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(c.bw, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != c.bw.size()) {
    throw Error(ErrorCode::InvalidArgument, "bandwidth must be a number or 'auto', got '" + c.bw + "'");
  }
  return v;
}

double require_bandwidth(const RunConfig& c, KernelFamily family)
{
  const auto bw = fixed_bandwidth(c);
  if (family == KernelFamily::Global) {
    return bw.value_or(1.0);
  }
  if (!bw) {
    throw Error(ErrorCode::InvalidArgument, "'" + c.command + "' needs an explicit bandwidth (--bw)");
  }
  return *bw;
}

std::vector<std::string> require_vars(const RunConfig& c)
{
  if (c.vars.empty()) {
    throw Error(ErrorCode::InvalidSelection, "no variables selected (--vars)");
  }
  return c.vars;
}

VariableSelection selection(const RunConfig& c)
{
  if (!c.dependent) {
    throw Error(ErrorCode::InvalidSelection, "'" + c.command + "' needs a dependent variable (--dependent)");
  }
  return VariableSelection{c.dependent, require_vars(c)};
}

BandwidthCriterion criterion(const RunConfig& c)
{
  const std::string s = c.criterion.value_or("aicc");
  if (s == "aicc") {
    return BandwidthCriterion::AICc;
  }
  if (s == "cv") {
    return BandwidthCriterion::CV;
  }
  throw Error(ErrorCode::InvalidArgument, "criterion must be 'cv' or 'aicc'");
}

void write_trace(const RunConfig& c, const BandwidthResult& r, std::ostream& out)
{
  std::ostringstream os;
  os << "bandwidth,score\n";
  for (const auto& [b, s] : r.trace) {
    os << format_double(b) << ',' << format_double(s) << '\n';
  }
  write_text(sidecar(c.out, "_bandwidth", ".csv"), os.str());
  out << "selected bandwidth: " << format_double(r.value) << " (score " << format_double(r.score) << ")\n";
}

ResultTable table_for(const RunConfig& c, const SpatialDataset& ds) { return ResultTable(ds.coords(), c.x, c.y); }

void save(const RunConfig& c, const ResultTable& t)
{
  if (c.out.empty()) {
    throw Error(ErrorCode::InvalidArgument, "an output path is required (--out)");
  }
  write_results(t, parse_format(c.format), c.out);
}

void add_coefficients(ResultTable& t, const std::vector<std::string>& names, const Eigen::MatrixXd& coefs)
{
  for (std::size_t j = 0; j < names.size(); ++j) {
    t.add(names[j], coefs.col(static_cast<Index>(j)));
  }
}

std::string describe(const KernelSpec& k)
{
  std::ostringstream os;
  os << "Kernel: " << to_string(k.family) << (k.adaptive ? " (adaptive)" : " (fixed)")
     << ", bandwidth: " << format_double(k.bandwidth) << '\n';
  return os.str();
}

int cmd_dist(const RunConfig& c, std::ostream&, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const DistanceMatrix m = make_source(c, ds).materialize();
  ResultTable t = table_for(c, ds);
  for (Index j = 0; j < m.values.cols(); ++j) {
    t.add("d" + std::to_string(j + 1), m.values.col(j));
  }
  save(c, t);
  return 0;
}

int cmd_gwss(const RunConfig& c, std::ostream&, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const KernelFamily family = parse_kernel(c.kernel);
  const KernelSpec kernel{family, require_bandwidth(c, family), c.adaptive};
  const auto res = gwss(ds, require_vars(c), kernel, make_source(c, ds), c.quantiles);
  ResultTable t = table_for(c, ds);
  for (const auto& v : res.variables) {
    t.add(v.name + "_LM", v.mean);
    t.add(v.name + "_LSD", v.sd);
    t.add(v.name + "_LVar", v.variance);
    t.add(v.name + "_LSKe", v.skew);
    t.add(v.name + "_LCV", v.cv);
    if (res.quantiles) {
      t.add(v.name + "_Median", v.median);
      t.add(v.name + "_IQR", v.iqr);
      t.add(v.name + "_QI", v.qi);
    }
  }
  for (const auto& p : res.pairs) {
    t.add("Cov_" + p.first + "." + p.second, p.covariance);
  }
  for (const auto& p : res.pairs) {
    t.add("Corr_" + p.first + "." + p.second, p.pearson);
  }
  for (const auto& p : res.pairs) {
    t.add("Spearman_rho_" + p.first + "." + p.second, p.spearman);
  }
  save(c, t);
  return 0;
}

int cmd_gwpca(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const auto vars = require_vars(c);
  const auto m = static_cast<Index>(vars.size());
  const KernelFamily family = parse_kernel(c.kernel);
  GwpcaOptions options;
  options.k = c.k > 0 ? c.k : std::min<Index>(2, m);
  if (c.robust == "mcd") {
    options.robust = true;
  } else if (c.robust != "none") {
    throw Error(ErrorCode::InvalidArgument, "gwpca supports --robust none or mcd");
  }
  options.seed = c.seed;
  const DistanceSource source = make_source(c, ds);
  KernelSpec kernel{family, 1.0, c.adaptive};
  if (auto bw = fixed_bandwidth(c); bw || family == KernelFamily::Global) {
    kernel.bandwidth = bw.value_or(1.0);
  } else {
    const auto r = gwpca_bandwidth(ds, vars, options.k, family, c.adaptive, source, options);
    write_trace(c, r, out);
    kernel.bandwidth = r.value;
  }
  const auto res = gwpca(ds, vars, kernel, source, options);
  ResultTable t = table_for(c, ds);
  for (Index j = 0; j < m; ++j) {
    t.add("Comp." + std::to_string(j + 1) + "_EV", res.eigenvalues.col(j));
  }
  for (Index j = 0; j < m; ++j) {
    t.add("PTV_" + std::to_string(j + 1), res.ptv.col(j));
  }
  for (Index j = 0; j < res.k; ++j) {
    t.add("win_var_PC" + std::to_string(j + 1), winning_variable_names(res, j));
  }
  save(c, t);

  std::ostringstream os;
  os << "location,component";
  for (const auto& v : vars) {
    os << ',' << csv_escape(v);
  }
  os << '\n';
  for (Index i = 0; i < ds.size(); ++i) {
    const auto& L = res.loadings[static_cast<std::size_t>(i)];
    for (Index j = 0; j < m; ++j) {
      os << i + 1 << ',' << j + 1;
      for (Index v = 0; v < m; ++v) {
        os << ',' << format_double(L(v, j));
      }
      os << '\n';
    }
  }
  write_text(sidecar(c.out, "_loadings", ".csv"), os.str());
  return 0;
}

KernelSpec gwr_kernel(const RunConfig& c, const SpatialDataset& ds, const VariableSelection& sel,
                      const DistanceSource& source, std::ostream& out)
{
  const KernelFamily family = parse_kernel(c.kernel);
  KernelSpec kernel{family, 1.0, c.adaptive};
  if (auto bw = fixed_bandwidth(c); bw || family == KernelFamily::Global) {
    kernel.bandwidth = bw.value_or(1.0);
    return kernel;
  }
  const auto r = gwr_bandwidth(ds, sel, family, c.adaptive, source, criterion(c));
  write_trace(c, r, out);
  kernel.bandwidth = r.value;
  return kernel;
}

int cmd_gwr(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const auto sel = selection(c);
  const DistanceSource source = make_source(c, ds);
  const KernelSpec kernel = gwr_kernel(c, ds, sel, source, out);
  GwrFit fit;
  if (c.robust == "none") {
    fit = gwr_basic(ds, sel, kernel, source);
  } else if (c.robust == "filtered") {
    fit = gwr_robust_filtered(ds, sel, kernel, source);
  } else if (c.robust == "iterative") {
    fit = gwr_robust_iterative(ds, sel, kernel, source);
  } else {
    throw Error(ErrorCode::InvalidArgument, "gwr supports --robust none, filtered or iterative");
  }
  for (const auto& w : fit.warnings) {
    err << "warning: " << w << '\n';
  }
  ResultTable t = table_for(c, ds);
  add_coefficients(t, fit.names, fit.coefficients);
  t.add("y", fit.y());
  t.add("yhat", fit.fitted);
  t.add("residual", fit.residuals);
  t.add("hat_diag", fit.hat_diag);
  if (fit.studentised) {
    t.add("Stud_residual", *fit.studentised);
  }
  if (fit.data_weights) {
    t.add("robust_weight", *fit.data_weights);
  }
  save(c, t);
  write_text(sidecar(c.out, "_diagnostics", ".txt"), describe(kernel) + format_report(gwr_report(fit)));
  return 0;
}

int cmd_gwr_select(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const auto sel = selection(c);
  const KernelFamily family = parse_kernel(c.kernel);
  const KernelSpec kernel{family, require_bandwidth(c, family), c.adaptive};
  const auto rep = stepwise_select(ds, *sel.dependent, sel.independents, kernel, make_source(c, ds));
  auto render = [&](const std::vector<std::size_t>& order) {
    std::ostringstream os;
    os << "model,round,variables,AICc\n";
    for (std::size_t idx : order) {
      const auto& mdl = rep.models[idx];
      std::string vars;
      for (const auto& v : mdl.variables) {
        vars += (vars.empty() ? "" : " ") + v;
      }
      os << idx + 1 << ',' << mdl.round << ',' << csv_escape(vars) << ',' << format_double(mdl.aicc) << '\n';
    }
    return os.str();
  };
  std::vector<std::size_t> evaluation(rep.models.size());
  for (std::size_t i = 0; i < evaluation.size(); ++i) {
    evaluation[i] = i;
  }
  if (c.out.empty()) {
    throw Error(ErrorCode::InvalidArgument, "an output path is required (--out)");
  }
  write_text(c.out, render(evaluation));
  write_text(sidecar(c.out, "_sorted", ".csv"), render(rep.sorted));
  out << "inclusion order:";
  for (const auto& v : rep.inclusion_order) {
    out << ' ' << v;
  }
  out << '\n';
  return 0;
}

int cmd_gwr_lcr(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const auto sel = selection(c);
  if (c.criterion && *c.criterion != "cv") {
    throw Error(ErrorCode::InvalidArgument, "gwr-lcr selects bandwidths by cross-validation only");
  }
  const DistanceSource source = make_source(c, ds);
  const KernelFamily family = parse_kernel(c.kernel);
  KernelSpec kernel{family, 1.0, c.adaptive};
  if (auto bw = fixed_bandwidth(c); bw || family == KernelFamily::Global) {
    kernel.bandwidth = bw.value_or(1.0);
  } else {
    const auto r = lcr_bandwidth(ds, sel, family, c.adaptive, source, c.adjust, c.cn_thresh);
    write_trace(c, r, out);
    kernel.bandwidth = r.value;
  }
  const auto fit = gwr_lcr(ds, sel, kernel, source, c.adjust, c.cn_thresh);
  ResultTable t = table_for(c, ds);
  add_coefficients(t, fit.names, fit.coefficients);
  t.add("yhat", fit.fitted);
  t.add("residual", fit.residuals);
  t.add("Local_CN", fit.local_cn);
  t.add("Local_Lambda", fit.local_lambda);
  save(c, t);
  return 0;
}

int cmd_gwr_collin(const RunConfig& c, std::ostream&, std::ostream& err)
{
  const SpatialDataset ds = load(c, c.input, err);
  const auto sel = selection(c);
  const KernelFamily family = parse_kernel(c.kernel);
  const KernelSpec kernel{family, require_bandwidth(c, family), c.adaptive};
  const auto d = collin_diagnostics(ds, sel, kernel, make_source(c, ds));
  ResultTable t = table_for(c, ds);
  for (std::size_t j = 0; j < d.pair_names.size(); ++j) {
    t.add("Corr_" + d.pair_names[j], d.correlations.col(static_cast<Index>(j)));
  }
  for (std::size_t j = 0; j < sel.independents.size(); ++j) {
    t.add(sel.independents[j] + "_VIF", d.vifs.col(static_cast<Index>(j)));
  }
  const auto k = static_cast<Index>(d.names.size());
  for (Index j = 0; j < k; ++j) {
    Eigen::VectorXd col(ds.size());
    for (Index i = 0; i < ds.size(); ++i) {
      col(i) = d.vdps[static_cast<std::size_t>(i)](k - 1, j);
    }
    t.add(d.names[static_cast<std::size_t>(j)] + "_VDP", std::move(col));
  }
  t.add("Local_CN", d.local_cn);
  auto flag = [&](bool CollinFlags::*member) {
    Eigen::VectorXd v(ds.size());
    for (Index i = 0; i < ds.size(); ++i) {
      v(i) = d.flags[static_cast<std::size_t>(i)].*member ? 1.0 : 0.0;
    }
    return v;
  };
  t.add("Flag_Corr", flag(&CollinFlags::correlation));
  t.add("Flag_VIF", flag(&CollinFlags::vif));
  t.add("Flag_VDP", flag(&CollinFlags::vdp));
  t.add("Flag_CN", flag(&CollinFlags::condition));
  save(c, t);
  return 0;
}

int cmd_gwr_predict(const RunConfig& c, std::ostream& out, std::ostream& err)
{
  const SpatialDataset calib = load(c, c.input, err);
  if (c.predict_input.empty()) {
    throw Error(ErrorCode::InvalidArgument, "gwr-predict needs target locations (--predict-input)");
  }
  const SpatialDataset targets = load(c, c.predict_input, err);
  const auto sel = selection(c);
  const DistanceSource source = make_source(c, calib);
  const KernelSpec kernel = gwr_kernel(c, calib, sel, source, out);
  const DistanceSource target_source = DistanceSource::between(calib.coords(), targets.coords(), distance_spec(c));
  const auto pred = gwr_predict(calib, sel, kernel, source, targets, target_source);
  for (Index i : pred.failed) {
    err << "warning: SingularLocalFit at target " << i + 1 << "; prediction set to NA\n";
  }
  ResultTable t = table_for(c, targets);
  add_coefficients(t, pred.names, pred.coefficients);
  t.add("prediction", pred.prediction);
  t.add("prediction_var", pred.prediction_var);
  save(c, t);
  std::ostringstream report;
  report << describe(kernel) << "sigma2: " << format_double(pred.sigma2) << "\nENP: " << format_double(pred.enp)
         << '\n';
  if (targets.find(*sel.dependent)) {
    const auto m = prediction_metrics(targets.column(*sel.dependent), pred.prediction, pred.prediction_var);
    report << "RMSPE: " << format_double(m.rmspe) << "\nMAPE: " << format_double(m.mape)
           << "\nMean.ZS: " << format_double(m.mean_zs) << "\nSD.ZS: " << format_double(m.sd_zs) << '\n';
  }
  write_text(sidecar(c.out, "_diagnostics", ".txt"), report.str());
  out << report.str();
  return 0;
}

std::string usage()
{
  std::string s = "usage: gwmodel <command> [options]\ncommands:";
  for (const auto& n : commands()) {
    s += " " + n;
  }
  return s + "\n";
}

} // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err)
{
  try {
    set_num_threads(config.threads);
    const std::string& cmd = config.command;
    if (cmd == "dist") {
      return cmd_dist(config, out, err);
    }
    if (cmd == "gwss") {
      return cmd_gwss(config, out, err);
    }
    if (cmd == "gwpca") {
      return cmd_gwpca(config, out, err);
    }
    if (cmd == "gwr") {
      return cmd_gwr(config, out, err);
    }
    if (cmd == "gwr-select") {
      return cmd_gwr_select(config, out, err);
    }
    if (cmd == "gwr-lcr") {
      return cmd_gwr_lcr(config, out, err);
    }
    if (cmd == "gwr-collin") {
      return cmd_gwr_collin(config, out, err);
    }
    if (cmd == "gwr-predict") {
      return cmd_gwr_predict(config, out, err);
    }
    err << "error: unknown command '" << cmd << "'\n" << usage();
    return 1;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int main_with_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  RunConfig c;
  CLI::App app{"Geographically weighted models", "gwmodel"};
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.add_option("command", c.command, "one of: dist gwss gwpca gwr gwr-select gwr-lcr gwr-collin gwr-predict")
      ->required();
  app.add_option("--input", c.input, "input CSV");
  app.add_option("--x", c.x, "x (or longitude) column")->capture_default_str();
  app.add_option("--y", c.y, "y (or latitude) column")->capture_default_str();
  app.add_flag("--geographic", c.geographic, "coordinates are longitude/latitude degrees");
  app.add_option("--dependent", c.dependent, "dependent variable");
  app.add_option("--vars", c.vars, "variables (comma separated)")->delimiter(',');
  app.add_option("--kernel", c.kernel, "global, gaussian, exponential, boxcar, bisquare or tricube")
      ->capture_default_str();
  app.add_option("--bw", c.bw, "bandwidth, or 'auto'")->capture_default_str();
  app.add_flag("--adaptive", c.adaptive, "bandwidth is a nearest-neighbour count");
  app.add_option("--criterion", c.criterion, "bandwidth criterion: cv or aicc");
  app.add_option("--k", c.k, "number of retained components");
  app.add_option("--robust", c.robust, "none, filtered, iterative (gwr) or mcd (gwpca)")->capture_default_str();
  app.add_option("--cn-thresh", c.cn_thresh, "condition-number threshold")->capture_default_str();
  app.add_flag("--adjust", c.adjust, "apply locally compensated ridge adjustment");
  app.add_flag("--quantiles", c.quantiles, "include median, IQR and quantile imbalance");
  app.add_option("--predict-input", c.predict_input, "CSV of prediction locations");
  app.add_option("--out", c.out, "output path");
  app.add_option("--format", c.format, "csv or geojson")->capture_default_str();
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--dist-cache", c.dist_cache, "binary distance-matrix cache file");
  app.add_option("--earth-radius", c.earth_radius, "sphere radius for great-circle distances");
  app.add_option("--power", c.power, "Minkowski power")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help() << usage();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << usage();
    return 1;
  }
  return run(c, out, err);
}

} // namespace gwmodel::cli
