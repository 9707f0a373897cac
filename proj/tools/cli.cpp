#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthoai/ablation.hpp"
#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"
#include "orthoai/pipeline.hpp"
#include "orthoai/report_store.hpp"
#include "service.hpp"

namespace orthoai::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string workspace = "workspace";
  std::uint64_t seed = 0;
  bool json_out = false;
  std::string config;
};

// Module defaults, optionally overridden by --config.
struct Settings {
  cases::GeneratorConfig generator;
  synth::SynthConfig synth;
  segnet::ModelConfig model;
  segnet::TrainConfig train;
  csp::KnowledgeBase kb = csp::default_knowledge_base();
  mcda::AssessOptions assess;
  lifting::LiftConfig lift;
};

template <class T>
T patched(const T& base, const json& patch) {
  auto j = json::parse(base.to_json());
  j.merge_patch(patch);
  return T::from_json(j.dump());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::NotFound, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, path + ": expected a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "generator") {
        auto& g = s.generator;
        g.arch_radius_mm = v.value("arch_radius_mm", g.arch_radius_mm);
        g.tooth_count = v.value("tooth_count", g.tooth_count);
        g.jitter_mm = v.value("jitter_mm", g.jitter_mm);
        g.arch_variation = v.value("arch_variation", g.arch_variation);
        g.interproximal_gap_mm = v.value("interproximal_gap_mm", g.interproximal_gap_mm);
        g.crowding_mm = v.value("crowding_mm", g.crowding_mm);
        if (v.contains("arch")) g.arch = v.at("arch") == "lower" ? cases::Arch::Lower : cases::Arch::Upper;
        g.validate();
      } else if (key == "synth") {
        s.synth = patched(s.synth, v);
      } else if (key == "model") {
        s.model = patched(s.model, v);
      } else if (key == "train") {
        s.train = patched(s.train, v);
      } else if (key == "kb") {
        s.kb = patched(s.kb, v);
      } else if (key == "wavf") {
        s.assess.wavf = patched(s.assess.wavf, v);
      } else if (key == "subscores") {
        auto& c = s.assess.subscores;
        c.ipr_indicated_mm = v.value("ipr_indicated_mm", c.ipr_indicated_mm);
        c.ipr_tolerance_mm = v.value("ipr_tolerance_mm", c.ipr_tolerance_mm);
        c.symmetry_tolerance_mm = v.value("symmetry_tolerance_mm", c.symmetry_tolerance_mm);
        c.attachment_rotation_deg = v.value("attachment_rotation_deg", c.attachment_rotation_deg);
        c.days_per_stage = v.value("days_per_stage", c.days_per_stage);
        c.days_per_month = v.value("days_per_month", c.days_per_month);
      } else if (key == "evaluate") {
        auto& e = s.assess.evaluate;
        e.default_lever_arm_mm = v.value("default_lever_arm_mm", e.default_lever_arm_mm);
        e.plan_is_total = v.value("plan_is_total", e.plan_is_total);
        if (v.contains("predictability")) e.predictability.values = v.at("predictability").get<decltype(e.predictability.values)>();
      } else if (key == "lift") {
        s.lift.min_support = v.value("min_support", s.lift.min_support);
      } else if (key == "sensitivity_perturbation") {
        s.assess.sensitivity_perturbation = v.get<double>();
      } else {
        throw Error(Errc::InvalidConfig, path + ": unknown section '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
  return s;
}

// Per-case cloud seed, independent of how many cases the workspace holds.
std::uint64_t cloud_seed(std::uint64_t seed, const std::string& case_id) {
  return seed ^ std::stoull(short_digest(case_id, 16), nullptr, 16);
}

class Printer {
 public:
  Printer(std::ostream& out, bool json_mode) : out_(out), json_(json_mode) {}
  bool json_mode() const { return json_; }
  void text(const std::string& line) {
    if (!json_) out_ << line << '\n';
  }
  void result(const json& j) {
    if (json_) out_ << j.dump() << '\n';
  }

 private:
  std::ostream& out_;
  bool json_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<synth::LabeledCloud> load_clouds(const store::Workspace& ws, int limit) {
  auto ids = ws.list(store::Kind::Cloud);
  if (limit > 0 && static_cast<std::size_t>(limit) < ids.size()) ids.resize(static_cast<std::size_t>(limit));
  if (ids.size() < 2) throw Error(Errc::NotFound, "need at least two clouds in the workspace; run synth first");
  std::vector<synth::LabeledCloud> out;
  for (const auto& id : ids) out.push_back(ws.get_cloud(id));
  return out;
}

segnet::TrainConfig stored_train_config(const store::Workspace& ws, const std::string& model_id) {
  if (!ws.contains(store::Kind::TrainConfig, model_id)) return {};
  return segnet::TrainConfig::from_json(ws.get(store::Kind::TrainConfig, model_id));
}

cases::MovementPlan resolve_plan(const store::Workspace& ws, const cases::ArchCase& c, const std::string& spec,
                                 std::uint64_t seed, const csp::KnowledgeBase& kb) {
  if (spec.empty()) {
    if (c.plan) return *c.plan;
    const auto id = c.case_id + "-compliant";
    if (ws.contains(store::Kind::Plan, id)) return ws.get_plan(id);
    return cases::generate_synthetic_plan(c, seed, cases::Severity::Compliant, kb);
  }
  if (fs::is_regular_file(spec)) return cases::parse_plan_file(read_text(spec));
  if (spec == "compliant" || spec == "borderline" || spec == "violating") {
    const auto id = c.case_id + "-" + spec;
    if (ws.contains(store::Kind::Plan, id)) return ws.get_plan(id);
    return cases::generate_synthetic_plan(c, seed, cases::parse_severity(spec), kb);
  }
  return ws.get_plan(spec);
}

json subscores_json(const mcda::SubScores& s) {
  return {{"bio", s.s_bio}, {"pred", s.p_bar}, {"stag", s.s_stag}, {"att", s.s_att}, {"ipr", s.s_ipr}, {"sym", s.s_sym}};
}

json history_json(std::span<const segnet::EpochRecord> h) {
  json a = json::array();
  for (const auto& e : h) {
    a.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"miou", e.miou}, {"tiou", e.tiou}, {"acc", e.acc}, {"tir", e.tir}});
  }
  return a;
}

std::string epoch_line(const std::string& prefix, const segnet::EpochRecord& e) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%sepoch %2d  loss %.4f  mIoU %.4f  tIoU %.4f  acc %.4f  TIR %.4f  (%.1f s)", prefix.c_str(),
                e.epoch, e.loss, e.miou, e.tiou, e.acc, e.tir, e.wall_ms / 1000.0);
  return buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"orthoai: tooth segmentation, biomechanical screening and plan scoring"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--workspace", g.workspace, "Workspace root directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_flag("--json", g.json_out, "Machine-readable output");
  app.add_option("--config", g.config, "JSON file overriding module defaults")->check(CLI::ExistingFile);

  // gen-synthetic
  int gen_n = 100;
  std::vector<std::string> gen_severities{"compliant", "borderline", "violating"};
  auto* gen = app.add_subcommand("gen-synthetic", "Generate synthetic cases and movement plans");
  gen->add_option("--n", gen_n, "Number of cases")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--severity", gen_severities, "Plan severities to generate")
      ->check(CLI::IsMember({"compliant", "borderline", "violating"}));

  // synth
  std::vector<std::string> synth_cases;
  int synth_points = 0;
  auto* syn = app.add_subcommand("synth", "Synthesize labeled point clouds for stored cases");
  syn->add_option("--case", synth_cases, "Case ids (default: all)");
  syn->add_option("--points", synth_points, "Points per cloud after sampling")->check(CLI::PositiveNumber);

  // train
  int train_epochs = 0, train_k = 0, train_limit = 0;
  double train_val = 0.2;
  std::string train_loss, train_features, model_id = "model", run_id = "train";
  bool train_rotate = false, train_no_aug = false;
  auto* trn = app.add_subcommand("train", "Train the segmentation network on stored clouds");
  trn->add_option("--epochs", train_epochs, "Epochs (default 10)")->check(CLI::PositiveNumber);
  trn->add_option("--k", train_k, "EdgeConv neighborhood size")->check(CLI::PositiveNumber);
  trn->add_option("--loss", train_loss, "Loss variant")->check(CLI::IsMember({"ce", "ce+fd", "ce+bd", "ce_ls+bd", "full"}));
  trn->add_option("--features", train_features, "Feature variant")
      ->check(CLI::IsMember({"full", "-dist", "-height", "-radial", "xyz"}));
  trn->add_option("--val", train_val, "Validation fraction")->check(CLI::Range(0.01, 0.99))->capture_default_str();
  trn->add_option("--cases", train_limit, "Use only the first N clouds")->check(CLI::PositiveNumber);
  trn->add_option("--model", model_id, "Checkpoint id")->capture_default_str();
  trn->add_option("--run", run_id, "History id")->capture_default_str();
  trn->add_flag("--rotate", train_rotate, "Add random axial rotation to augmentation");
  trn->add_flag("--no-augment", train_no_aug, "Disable augmentation");

  // eval
  std::string eval_split = "val";
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on stored clouds");
  evl->add_option("--model", model_id, "Checkpoint id")->capture_default_str();
  evl->add_option("--split", eval_split, "val or all")->check(CLI::IsMember({"val", "all"}))->capture_default_str();
  evl->add_option("--val", train_val, "Validation fraction used at training")->check(CLI::Range(0.01, 0.99));
  evl->add_option("--cases", train_limit, "Use only the first N clouds")->check(CLI::PositiveNumber);

  // analyze
  std::string case_id, plan_spec;
  bool oracle_labels = false;
  auto* ana = app.add_subcommand("analyze", "Segment, lift, check constraints and score one case");
  ana->add_option("--case", case_id, "Case id")->required();
  ana->add_option("--plan", plan_spec, "Plan file, stored plan id, or compliant|borderline|violating");
  ana->add_option("--model", model_id, "Checkpoint id")->capture_default_str();
  ana->add_flag("--oracle-labels", oracle_labels, "Use the cloud's ground-truth labels instead of the network");

  // score
  std::string weights_spec;
  auto* sco = app.add_subcommand("score", "Show (or re-weight) the score of a stored assessment");
  sco->add_option("--case", case_id, "Case id")->required();
  sco->add_option("--weights", weights_spec, "Override weights, e.g. bio=0.3,pred=0.2,...");

  // sensitivity
  double perturbation = 0.5;
  auto* sen = app.add_subcommand("sensitivity", "Weight sensitivity of a stored assessment");
  sen->add_option("--case", case_id, "Case id")->required();
  sen->add_option("--perturbation", perturbation, "Relative weight perturbation")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  // ablate
  std::vector<std::string> grids;
  ablation::Setup setup;
  std::string ablate_out = "ablation";
  auto* abl = app.add_subcommand("ablate", "Run an ablation grid end to end");
  abl->add_option("--grid", grids, "Grid such as k=3,5,10,20 (repeatable)")->required();
  abl->add_option("--cases", setup.cases, "Synthetic cases")->check(CLI::Range(2, 100000))->capture_default_str();
  abl->add_option("--epochs", setup.epochs, "Epochs per variant")->check(CLI::PositiveNumber)->capture_default_str();
  abl->add_option("--points", setup.points, "Points per cloud")->check(CLI::Range(16, 100000))->capture_default_str();
  abl->add_option("--out", ablate_out, "Result id prefix")->capture_default_str();

  // serve
  service::ServiceConfig svc;
  auto* srv = app.add_subcommand("serve", "Serve the workspace over HTTP");
  srv->add_option("--port", svc.port, "Port")->check(CLI::Range(0, 65535))->capture_default_str();
  srv->add_option("--host", svc.host, "Bind address")->capture_default_str();
  srv->add_option("--threads", svc.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  srv->add_option("--model", svc.model_id, "Checkpoint id")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  Printer p(out, g.json_out);
  try {
    const Settings s = load_settings(g.config);
    store::Workspace ws(g.workspace);

    if (*gen) {
      json ids = json::array();
      int plans = 0;
      for (int i = 0; i < gen_n; ++i) {
        const auto seed = g.seed + static_cast<std::uint64_t>(i);
        const auto c = cases::generate_synthetic_case(seed, s.generator);
        ws.put_case(c);
        for (const auto& sev : gen_severities) {
          ws.put_plan(c.case_id + "-" + sev, cases::generate_synthetic_plan(c, seed, cases::parse_severity(sev), s.kb));
          ++plans;
        }
        ids.push_back(c.case_id);
      }
      p.text("wrote " + std::to_string(gen_n) + " cases and " + std::to_string(plans) + " plans to " + ws.root().string());
      p.result({{"cases", ids}, {"plans", plans}});
    } else if (*syn) {
      auto cfg = s.synth;
      if (synth_points > 0) {
        cfg.fps_points = synth_points;
        cfg.target_points_raw = std::max(cfg.target_points_raw, 3 * synth_points);
      }
      auto ids = synth_cases.empty() ? ws.list(store::Kind::Case) : synth_cases;
      if (ids.empty()) throw Error(Errc::NotFound, "no cases in the workspace; run gen-synthetic first");
      json written = json::array();
      for (const auto& id : ids) {
        const auto c = ws.get_case(id);
        const auto seed = cloud_seed(g.seed, id);
        const auto cloud = synth::synthesize_cloud(c, cfg, seed);
        ws.put_cloud(cloud, {seed, cfg.digest()});
        written.push_back({{"case_id", id}, {"points", cloud.size()}, {"gingiva_fraction", cloud.gingiva_fraction()}});
      }
      p.text("wrote " + std::to_string(ids.size()) + " clouds");
      p.result({{"clouds", written}, {"config_hash", cfg.digest()}});
    } else if (*trn) {
      auto tcfg = s.train;
      tcfg.seed = g.seed;
      if (train_epochs > 0) tcfg.epochs = train_epochs;
      if (!train_loss.empty()) tcfg.loss = segnet::LossConfig::variant(train_loss);
      if (train_rotate) tcfg.augmentation.rotate = true;
      if (train_no_aug) tcfg.augment = false;
      auto mcfg = s.model;
      if (train_k > 0) mcfg.k = train_k;
      if (!train_features.empty()) {
        tcfg.feature_mask = segnet::feature_columns(train_features);
        mcfg.in_dim = static_cast<int>(tcfg.feature_mask.size());
      }
      const auto clouds = load_clouds(ws, train_limit);
      const auto [tr, va] = segnet::split_indices(clouds.size(), train_val, g.seed);
      std::vector<synth::LabeledCloud> train_set, val_set;
      for (auto i : tr) train_set.push_back(clouds[i]);
      for (auto i : va) val_set.push_back(clouds[i]);
      p.text("training on " + std::to_string(train_set.size()) + " clouds, validating on " +
             std::to_string(val_set.size()));
      auto result = segnet::train(segnet::SegModel(mcfg, g.seed), train_set, val_set, tcfg,
                                  [&](const segnet::EpochRecord& e) { p.text(epoch_line("", e)); });
      ws.put(store::Kind::Checkpoint, model_id, segnet::save_checkpoint(result.best_model, tcfg.digest()));
      ws.put(store::Kind::TrainConfig, model_id, tcfg.to_json());
      ws.put_history(run_id, result.history);
      p.text("best epoch " + std::to_string(result.best_epoch) + "; checkpoint '" + model_id + "', history '" + run_id + "'");
      p.result({{"model", model_id},
                {"run", run_id},
                {"best_epoch", result.best_epoch},
                {"parameters", result.best_model.parameter_count()},
                {"history", history_json(result.history)}});
    } else if (*evl) {
      const auto tcfg = stored_train_config(ws, model_id);
      const auto loaded = segnet::load_checkpoint(ws.get(store::Kind::Checkpoint, model_id));
      const auto clouds = load_clouds(ws, train_limit);
      std::vector<synth::LabeledCloud> subset;
      if (eval_split == "all") {
        subset = clouds;
      } else {
        for (auto i : segnet::split_indices(clouds.size(), train_val, g.seed).second) subset.push_back(clouds[i]);
      }
      const auto report = segnet::evaluate(loaded.model, subset, tcfg.feature_mask, tcfg.tir);
      ws.put(store::Kind::Metrics, model_id + "-" + eval_split, report.to_json());
      p.text("scans " + std::to_string(subset.size()) + "  mIoU " + fmt("%.4f", report.miou) + "  tIoU " +
             fmt("%.4f", report.tiou) + "  acc " + fmt("%.4f", report.acc) + "  TIR " + fmt("%.4f", report.tir));
      p.result(json::parse(report.to_json()));
    } else if (*ana) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto c = ws.get_case(case_id);
      const auto plan = resolve_plan(ws, c, plan_spec, g.seed, s.kb);
      std::vector<std::string> notes;
      synth::LabeledCloud cloud;
      if (ws.contains(store::Kind::Cloud, case_id)) {
        cloud = ws.get_cloud(case_id);
      } else {
        const auto seed = cloud_seed(g.seed, case_id);
        cloud = synth::synthesize_cloud(c, s.synth, seed);
        ws.put_cloud(cloud, {seed, s.synth.digest()});
        notes.push_back("cloud synthesized on demand");
      }
      pipeline::AnalyzeOptions opts;
      opts.assess = s.assess;
      opts.lift = s.lift;
      std::optional<segnet::SegModel> model;
      if (!oracle_labels) {
        model = segnet::load_checkpoint(ws.get(store::Kind::Checkpoint, model_id)).model;
        opts.feature_mask = stored_train_config(ws, model_id).feature_mask;
      }
      auto res = pipeline::analyze(c, cloud, model ? &*model : nullptr, plan, s.kb, opts);
      res.assessment.warnings.insert(res.assessment.warnings.begin(), notes.begin(), notes.end());
      ws.put_report(res.assessment);
      const double total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      const auto& a = res.assessment;
      const auto alerts = a.alerts();
      p.text(a.case_id + ": score " + fmt("%.2f", a.score.value) + " grade " + std::string(1, a.score.grade) + ", " +
             std::to_string(alerts.size()) + " alerts, " + std::to_string(a.minimal_stages) + " minimal stages, " +
             std::to_string(a.duration_months) + " months");
      for (const auto* e : alerts) {
        p.text("  " + std::string(csp::alert_name(e->alert)) + " tooth " + std::to_string(e->tooth.code()) + " " +
               std::string(csp::component_name(e->component)) + " observed " + fmt("%.3f", e->observed) + " limit " +
               fmt("%.3f", e->limit) + " sigma " + fmt("%.3f", e->sigma));
      }
      for (const auto& w : a.warnings) p.text("  note: " + w);
      p.text("  teeth lifted " + std::to_string(res.lifted.teeth.size()) + "; " + fmt("%.0f", total_ms) + " ms total");
      json j = json::parse(a.to_json());
      j["timings_ms"] = {{"inference", res.timings.inference_ms},
                         {"lifting", res.timings.lifting_ms},
                         {"reasoning", res.timings.reasoning_ms},
                         {"total", total_ms}};
      p.result(j);
    } else if (*sco) {
      const auto a = ws.get_report(case_id, s.kb);
      auto wavf = a.wavf;
      if (!weights_spec.empty()) {
        std::stringstream ss(weights_spec);
        std::string kv;
        while (std::getline(ss, kv, ',')) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw Error(Errc::InvalidConfig, "--weights entry '" + kv + "' needs name=value");
          wavf.weights[static_cast<std::size_t>(mcda::parse_criterion(kv.substr(0, eq)))] = std::stod(kv.substr(eq + 1));
        }
      }
      const auto sc = mcda::wavf_score(a.subscores, wavf);
      const auto v = a.subscores.values();
      for (std::size_t i = 0; i < mcda::kCriteria; ++i) {
        p.text(std::string(mcda::criterion_name(mcda::kAllCriteria[i])) + "  " + fmt("%.4f", v[i]) + "  w " +
               fmt("%.3f", wavf.weights[i]));
      }
      p.text("score " + fmt("%.2f", sc.value) + " grade " + std::string(1, sc.grade));
      p.result({{"case_id", a.case_id},
                {"subscores", subscores_json(a.subscores)},
                {"wavf", json::parse(wavf.to_json())},
                {"score", sc.value},
                {"grade", std::string(1, sc.grade)}});
    } else if (*sen) {
      const auto a = ws.get_report(case_id, s.kb);
      const auto rows = mcda::sensitivity(a.subscores, a.wavf, perturbation);
      json j = json::object();
      p.text("criterion  -" + fmt("%.0f%%", 100 * perturbation) + "  +" + fmt("%.0f%%", 100 * perturbation) + "  max|dS|");
      for (const auto& r : rows) {
        const std::string name(mcda::criterion_name(r.criterion));
        p.text(name + "  " + fmt("%+.3f", r.delta_minus) + "  " + fmt("%+.3f", r.delta_plus) + "  " + fmt("%.3f", r.max_abs));
        j[name] = {{"minus", r.delta_minus}, {"plus", r.delta_plus}, {"max_abs", r.max_abs}};
      }
      p.result({{"case_id", a.case_id}, {"perturbation", perturbation}, {"sensitivity", j}});
    } else if (*abl) {
      std::vector<ablation::Grid> parsed;
      for (const auto& spec : grids) parsed.push_back(ablation::parse_grid(spec));
      setup.seed = g.seed;
      setup.generator = s.generator;
      setup.synth = s.synth;
      setup.model = s.model;
      setup.train = s.train;
      const auto data = ablation::make_dataset(setup);
      json tables = json::array();
      for (const auto& grid : parsed) {
        const auto rows = ablation::run_grid(grid, setup, data, [&](const std::string& v, const segnet::EpochRecord& e) {
          p.text(epoch_line(v + "  ", e));
        });
        ws.put(store::Kind::Metrics, ablate_out + "-" + grid.axis, ablation::rows_to_json(rows));
        p.text(ablation::rows_to_markdown(rows));
        tables.push_back({{"axis", grid.axis}, {"rows", json::parse(ablation::rows_to_json(rows))}});
      }
      p.result({{"tables", tables}});
    } else if (*srv) {
      svc.workspace = g.workspace;
      svc.assess = s.assess;
      service::Service service(svc, s.kb);
      err << "serving " << ws.root().string() << " on http://" << svc.host << ":" << svc.port << '\n';
      service.serve();
    }
    return kOk;
  } catch (const Error& e) {
    if (g.json_out) {
      out << json{{"error", {{"code", e.name()}, {"message", e.what()}}}}.dump() << '\n';
    } else {
      err << "error: " << e.what() << '\n';
    }
    return kDomainError;
  } catch (const std::exception& e) {
    if (g.json_out) {
      out << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << '\n';
    } else {
      err << "error: " << e.what() << '\n';
    }
    return kDomainError;
  }
}

}  // namespace orthoai::cli
