// vwsim: command-line entry points for the simulator, learners and benchmark.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vw/appld.hpp"
#include "vw/bclearn.hpp"
#include "vw/dataset.hpp"
#include "vw/error.hpp"
#include "vw/harness.hpp"
#include "vw/pgm.hpp"
#include "vw/service.hpp"
#include "vw/terrain.hpp"

namespace {

using nlohmann::json;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<vw::Difficulty> parse_difficulties(const std::vector<std::string>& names) {
  std::vector<vw::Difficulty> out;
  for (const auto& n : names) out.push_back(vw::parse_difficulty(n));
  return out;
}

std::vector<vw::VehicleKind> parse_vehicles(const std::vector<std::string>& names) {
  std::vector<vw::VehicleKind> out;
  for (const auto& n : names) out.push_back(vw::parse_vehicle(n));
  return out;
}

std::vector<vw::Demonstration> load_all(const std::string& root) {
  std::vector<vw::Demonstration> demos;
  for (const auto& dir : vw::find_trials(root)) demos.push_back(vw::load_demonstration(dir));
  if (demos.empty()) throw vw::DataError("no trial directories under " + root);
  return demos;
}

json trial_json(const vw::TrialResult& r) {
  json j = {{"outcome", std::string(vw::to_string(r.outcome))},
            {"controller", r.controller},
            {"vehicle", std::string(vw::to_string(r.vehicle))},
            {"difficulty", std::string(vw::to_string(r.difficulty))},
            {"direction", r.direction},
            {"seed", r.seed},
            {"ticks", r.ticks},
            {"final_x", r.final_pose.x},
            {"final_y", r.final_pose.y}};
  j["traversal_time"] = r.traversal_time ? json(*r.traversal_time) : json(nullptr);
  return j;
}

void write_text(const std::string& path, const std::string& text) { vw::write_file(path, text); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wheeled-vehicle terrain simulator, learners and benchmark"};
  app.set_config("--config", "", "TOML/INI file whose keys mirror the flags");
  app.require_subcommand(1);

  // ------------------------------------------------------------ gen-course
  auto* gen = app.add_subcommand("gen-course", "Generate a course heightmap (16-bit PGM plus .meta sidecar)");
  vw::CourseSpec gspec;
  std::string gdiff = "Easy", gout = "course.pgm";
  gen->add_option("--difficulty", gdiff, "Flat, Easy, Medium or Difficult")->capture_default_str();
  gen->add_option("--seed", gspec.seed, "Course seed")->capture_default_str();
  gen->add_option("--length", gspec.length_m, "Course length, m")->capture_default_str();
  gen->add_option("--width", gspec.width_m, "Course width, m")->capture_default_str();
  gen->add_option("--resolution", gspec.resolution, "Cell size, m")->capture_default_str();
  gen->add_option("-o,--out", gout, "Output PGM path")->capture_default_str();

  // ------------------------------------------------------------ run-trial
  auto* run = app.add_subcommand("run-trial", "Run one trial and print the result as JSON");
  std::string rctl = "OL", rveh = "V6W", rdiff = "Easy", rpolicy, rappld, rrb, rrecord;
  std::uint64_t rseed = 0;
  int rdir = 1;
  double rlateral = 0.0;
  vw::TrialConfig rtc;
  run->add_option("--controller", rctl, "OL, RB, BC (policy file), APPLD (fit dir) or EXPERT")->capture_default_str();
  run->add_option("--vehicle", rveh, "V6W or V4W")->capture_default_str();
  run->add_option("--difficulty", rdiff)->capture_default_str();
  run->add_option("--seed", rseed, "Course seed")->capture_default_str();
  run->add_option("--direction", rdir, "+1 or -1")->check(CLI::IsMember({1, -1}))->capture_default_str();
  run->add_option("--lateral", rlateral, "Lateral start offset, m")->capture_default_str();
  run->add_option("--timeout", rtc.timeout, "Seconds")->capture_default_str();
  run->add_option("--depth-side", rtc.depth_side, "Depth image side, px")->capture_default_str();
  run->add_option("--policy", rpolicy, "BC policy file (.vwbc)");
  run->add_option("--appld", rappld, "Directory written by appld-fit");
  run->add_option("--rb-params", rrb, "RB parameter JSON");
  run->add_option("--record", rrecord, "Record the trial into this directory");

  // ------------------------------------------------------------ bench
  auto* bench = app.add_subcommand("bench", "Run the benchmark grid and print the report");
  vw::BenchConfig bcfg;
  std::vector<std::string> bveh{"V6W", "V4W"}, bdiff{"Easy", "Medium", "Difficult"};
  std::vector<std::string> bpolicies;
  std::string bout;
  bench->add_option("--seed", bcfg.seed, "Base seed")->capture_default_str();
  bench->add_option("--trials", bcfg.trials, "Trials per cell (first half forward)")->capture_default_str();
  bench->add_option("--vehicles", bveh)->capture_default_str();
  bench->add_option("--difficulties", bdiff)->capture_default_str();
  bench->add_option("--controllers", bcfg.controllers, "OL, RB, BC6, BC4, BC")->capture_default_str();
  bench->add_option("--timeout", bcfg.trial.timeout)->capture_default_str();
  bench->add_option("--depth-side", bcfg.trial.depth_side)->capture_default_str();
  bench->add_option("--lateral-jitter", bcfg.lateral_jitter)->capture_default_str();
  bench->add_option("--demos-per-difficulty", bcfg.demos.per_difficulty)->capture_default_str();
  bench->add_option("--epochs", bcfg.train.epochs)->capture_default_str();
  bench->add_option("--policy", bpolicies, "NAME=FILE pre-trained policy (e.g. BC6=v6w.vwbc)");
  bench->add_option("--out-dir", bout, "Also write report.txt, bench.csv and trials.csv here");

  // ------------------------------------------------------------ record
  auto* rec = app.add_subcommand("record", "Record scripted demonstrations headlessly");
  vw::DemoConfig dcfg;
  std::string dveh = "V6W", dout = "demos";
  std::vector<std::string> ddiff{"Easy", "Medium", "Difficult"};
  rec->add_option("--vehicle", dveh)->capture_default_str();
  rec->add_option("--seed", dcfg.seed)->capture_default_str();
  rec->add_option("--difficulties", ddiff)->capture_default_str();
  rec->add_option("--per-difficulty", dcfg.per_difficulty)->capture_default_str();
  rec->add_option("--timeout", dcfg.timeout)->capture_default_str();
  rec->add_option("--depth-side", dcfg.depth_side)->capture_default_str();
  rec->add_option("-o,--out", dout, "Root directory for trial directories")->capture_default_str();

  // ------------------------------------------------------------ train-bc
  auto* trn = app.add_subcommand("train-bc", "Train a behavior cloning policy on recorded trials");
  vw::TrainConfig tcfg;
  std::string tdata, tout = "policy.vwbc", tarch = "default";
  trn->add_option("--data", tdata, "Dataset root")->required();
  trn->add_option("-o,--out", tout)->capture_default_str();
  trn->add_option("--seed", tcfg.seed)->capture_default_str();
  trn->add_option("--epochs", tcfg.epochs)->capture_default_str();
  trn->add_option("--learning-rate", tcfg.learning_rate)->capture_default_str();
  trn->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
  trn->add_option("--h-v", tcfg.H[0], "Loss weight on v")->capture_default_str();
  trn->add_option("--h-omega", tcfg.H[1], "Loss weight on omega")->capture_default_str();
  trn->add_option("--arch", tarch, "default or tiny")->check(CLI::IsMember({"default", "tiny"}))->capture_default_str();

  // ------------------------------------------------------------ appld-fit
  auto* afit = app.add_subcommand("appld-fit", "Segment demonstrations and fit per-context RB parameters");
  vw::AppldConfig acfg;
  std::string adata, aout = "appld";
  std::uint64_t aseed = 0;
  afit->add_option("--data", adata, "Dataset root")->required();
  afit->add_option("-o,--out", aout)->capture_default_str();
  afit->add_option("--seed", aseed)->capture_default_str();
  afit->add_option("--budget", acfg.fit.budget, "Evaluations per segment")->capture_default_str();
  afit->add_option("--min-seg-len", acfg.segmentation.min_seg_len)->capture_default_str();
  afit->add_option("--penalty", acfg.segmentation.penalty)->capture_default_str();
  afit->add_option("--h-v", acfg.fit.H[0])->capture_default_str();
  afit->add_option("--h-omega", acfg.fit.H[1])->capture_default_str();
  afit->add_flag("--conditional-locking", acfg.fit.conditional_locking);

  // ------------------------------------------------------------ serve
  auto* srv = app.add_subcommand("serve", "Run the teleoperation session service");
  vw::ServiceConfig scfg;
  std::string sdiff = "Easy", sveh = "V6W", sroot = "recordings";
  srv->add_option("--port", scfg.port)->capture_default_str();
  srv->add_option("--difficulty", sdiff)->capture_default_str();
  srv->add_option("--seed", scfg.course.seed, "Course seed")->capture_default_str();
  srv->add_option("--vehicle", sveh)->capture_default_str();
  srv->add_option("--record-root", sroot)->capture_default_str();
  srv->add_option("--depth-side", scfg.depth_side)->capture_default_str();

  // ------------------------------------------------------------ dataset tools
  auto* val = app.add_subcommand("dataset-validate", "Validate trial directories (or roots containing them)");
  std::vector<std::string> vpaths;
  std::uint64_t vseed = 0;
  val->add_option("paths", vpaths)->required();
  val->add_option("--seed", vseed, "Unused; accepted for uniformity");

  auto* stats = app.add_subcommand("dataset-stats", "Summary statistics of one trial directory");
  std::string spath;
  std::uint64_t sseed = 0;
  stats->add_option("path", spath)->required();
  stats->add_option("--seed", sseed, "Unused; accepted for uniformity");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gspec.difficulty = vw::parse_difficulty(gdiff);
      const vw::HeightMap map = vw::generate_course(gspec);
      vw::save_heightmap(map, gout);
      std::printf("%s: %dx%d cells, max height %.3f m\n", gout.c_str(), map.length_cells(), map.width_cells(),
                  map.max_height());
      return 0;
    }

    if (*run) {
      vw::CourseSpec spec;
      spec.difficulty = vw::parse_difficulty(rdiff);
      spec.seed = rseed;
      const vw::Course course = vw::make_course(spec);
      const vw::VehicleGeometry geom = vw::VehicleGeometry::preset(vw::parse_vehicle(rveh));
      std::unique_ptr<vw::Controller> ctl;
      if (rctl == "OL") {
        ctl = std::make_unique<vw::OpenLoopController>();
      } else if (rctl == "RB") {
        ctl = std::make_unique<vw::RuleBasedController>(rrb.empty() ? vw::RbParams{} : vw::load_rb_params(rrb));
      } else if (rctl == "BC") {
        if (rpolicy.empty()) throw vw::ParameterError("--policy is required for BC");
        ctl = std::make_unique<vw::BcController>(vw::load_bc_params(rpolicy));
      } else if (rctl == "APPLD") {
        if (rappld.empty()) throw vw::ParameterError("--appld is required for APPLD");
        auto [lib, model] = vw::load_appld(rappld);
        ctl = std::make_unique<vw::AppldController>(std::move(model), std::move(lib));
      } else if (rctl == "EXPERT") {
        ctl = std::make_unique<vw::ScriptedDriver>(course.map, geom, spec.width_m, rdir);
      } else {
        throw vw::ParameterError("unknown controller '" + rctl + "'");
      }
      std::unique_ptr<vw::Recorder> recorder;
      if (!rrecord.empty()) {
        vw::Manifest m;
        m.vehicle = geom.name;
        m.course_seed = spec.seed;
        m.course_difficulty = spec.difficulty;
        m.trial_id = std::filesystem::path(rrecord).filename().string();
        recorder = std::make_unique<vw::Recorder>(rrecord, m);
      }
      vw::TrialResult r = vw::run_trial(*ctl, geom, course, vw::start_pose(spec, rdir, rlateral), rtc, recorder.get());
      if (recorder) recorder->close();
      r.seed = rseed;
      std::cout << trial_json(r).dump() << "\n";
      return 0;
    }

    if (*bench) {
      bcfg.vehicles = parse_vehicles(bveh);
      bcfg.difficulties = parse_difficulties(bdiff);
      for (const auto& spec : bpolicies) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw vw::ParameterError("--policy expects NAME=FILE");
        bcfg.policies[spec.substr(0, eq)] = vw::load_bc_params(spec.substr(eq + 1));
      }
      const vw::BenchTable table = vw::run_benchmark(bcfg);
      const std::string report = vw::format_report(table, bcfg);
      std::cout << report;
      if (!bout.empty()) {
        std::filesystem::create_directories(bout);
        write_text(bout + "/report.txt", report);
        write_text(bout + "/bench.csv", vw::format_csv(table));
        write_text(bout + "/trials.csv", vw::format_trials_csv(table));
      }
      return 0;
    }

    if (*rec) {
      dcfg.vehicle = vw::parse_vehicle(dveh);
      dcfg.difficulties = parse_difficulties(ddiff);
      const auto demos = vw::record_demos(dcfg, dout);
      for (const auto& d : demos)
        std::printf("%s/%s: %zu frames\n", dout.c_str(), d.manifest.trial_id.c_str(), d.size());
      return 0;
    }

    if (*trn) {
      if (tarch == "tiny") tcfg.arch = vw::BcArch::tiny();
      const auto demos = load_all(tdata);
      const vw::TrainResult r = vw::train(demos, tcfg);
      vw::save_bc_params(r.params, tout);
      for (std::size_t e = 0; e < r.loss_curve.size(); ++e) std::printf("epoch %zu loss %.6g\n", e, r.loss_curve[e]);
      std::printf("wrote %s\n", tout.c_str());
      return 0;
    }

    if (*afit) {
      acfg.fit.seed = aseed;
      acfg.classifier.seed = aseed;
      const auto demos = load_all(adata);
      const vw::AppldResult r = vw::appld_fit(demos, acfg);
      vw::save_appld(aout, r.library, r.model);
      for (const auto& s : r.segments)
        std::printf("demo %zu frames [%zu, %zu) context %d loss %.6g\n", s.demo, s.begin, s.end, s.context, s.loss);
      std::printf("wrote %s (%zu contexts)\n", aout.c_str(), r.library.entries.size());
      return 0;
    }

    if (*srv) {
      scfg.course.difficulty = vw::parse_difficulty(sdiff);
      scfg.vehicle = vw::parse_vehicle(sveh);
      scfg.record_root = sroot;
      vw::Service service(scfg);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::printf("listening on 127.0.0.1:%u\n", service.port());
      std::fflush(stdout);
      service.run(g_stop);
      return 0;
    }

    if (*val) {
      int failures = 0;
      for (const auto& p : vpaths) {
        std::vector<std::filesystem::path> dirs;
        if (std::filesystem::exists(std::filesystem::path(p) / "manifest.txt")) {
          dirs.push_back(p);
        } else {
          dirs = vw::find_trials(p);
          if (dirs.empty()) dirs.push_back(p);  // reported as a missing manifest below
        }
        for (const auto& dir : dirs) {
          try {
            const auto demo = vw::load_demonstration(dir);
            std::printf("OK %s (%zu frames)\n", dir.string().c_str(), demo.size());
          } catch (const vw::DatasetError& e) {
            ++failures;
            std::printf("FAIL %s: %s: %s\n", dir.string().c_str(), std::string(vw::to_string(e.kind())).c_str(),
                        e.what());
          }
        }
      }
      return failures == 0 ? 0 : 1;
    }

    if (*stats) {
      std::cout << vw::format_stats(vw::dataset_stats(vw::load_demonstration(spath)));
      return 0;
    }
  } catch (const vw::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
