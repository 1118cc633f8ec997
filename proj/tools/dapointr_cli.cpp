// Command-line front end: gen-data, train, eval, probe, complete.
#include "dapointr/cloud_io.hpp"
#include "dapointr/config.hpp"
#include "dapointr/datagen.hpp"
#include "dapointr/dataset.hpp"
#include "dapointr/errors.hpp"
#include "dapointr/evaluate.hpp"
#include "dapointr/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace dapointr;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptive point cloud completion"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic source/target benchmark");
  fs::path gen_out;
  std::uint64_t gen_seed = 0;
  std::string src_occ = "half-space", tgt_occ = "view-cone";
  datagen::BenchmarkOptions bench;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Benchmark seed");
  gen->add_option("--source-occlusion", src_occ, "half-space | view-cone | patch-drop");
  gen->add_option("--target-occlusion", tgt_occ, "half-space | view-cone | patch-drop");
  gen->add_option("--source-res", bench.source.resolution, "Source partial resolution");
  gen->add_option("--target-res", bench.target.resolution, "Target partial resolution");
  gen->add_option("--source-fraction", bench.source.occlusion_fraction, "Removed fraction, source");
  gen->add_option("--target-fraction", bench.target.occlusion_fraction, "Removed fraction, target");
  gen->add_option("--noise-sigma-src", bench.source.noise_sigma, "Gaussian noise sigma, source");
  gen->add_option("--noise-sigma-tgt", bench.target.noise_sigma, "Gaussian noise sigma, target");
  gen->add_option("--per-category", bench.per_category, "Shapes per category and split");
  gen->add_option("--complete-points", bench.complete_points, "Points per complete cloud");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a benchmark directory");
  fs::path tr_data, tr_out, tr_config;
  std::optional<fs::path> tr_resume;
  std::vector<std::string> ablations;
  std::string head_name;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--data", tr_data, "Benchmark directory")->required();
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--config", tr_config, "Config file (key = value)");
  tr->add_option("--ablate", ablations, "Disable ptfa, dqfa or vpc")->check(CLI::IsMember({"ptfa", "dqfa", "vpc"}));
  tr->add_option("--head", head_name, "Refinement head")->check(CLI::IsMember({"fold", "spd"}));
  tr->add_option("--seed", tr_seed, "Run seed");
  tr->add_option("--resume", tr_resume, "Continue from a checkpoint");

  // eval
  auto* ev = app.add_subcommand("eval", "Per-category metric table on an evaluation split");
  fs::path ev_ckpt, ev_data, ev_out;
  std::string ev_metrics = "cd";
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Evaluation split or benchmark directory")->required();
  ev->add_option("--metrics", ev_metrics, "Comma-separated: cd,ucd,uhd");
  ev->add_option("--out", ev_out, "CSV output");

  // probe
  auto* pr = app.add_subcommand("probe", "Linear domain probe on encoder features");
  fs::path pr_ckpt, pr_source, pr_target, pr_out;
  std::uint64_t pr_seed = 0;
  pr->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  pr->add_option("--source", pr_source, "Source split directory")->required();
  pr->add_option("--target", pr_target, "Target split directory")->required();
  pr->add_option("--out", pr_out, "CSV output (x, y, lambda)")->required();
  pr->add_option("--seed", pr_seed, "Probe split seed");

  // complete
  auto* co = app.add_subcommand("complete", "Complete one partial cloud");
  fs::path co_ckpt, co_in, co_out;
  co->add_option("--ckpt", co_ckpt, "Checkpoint")->required();
  co->add_option("--in", co_in, "Input cloud (.ply or .xyz)")->required();
  co->add_option("--out", co_out, "Output cloud")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      bench.seed = gen_seed;
      bench.source.occlusion = datagen::parse_occlusion(src_occ);
      bench.target.occlusion = datagen::parse_occlusion(tgt_occ);
      const auto s = datagen::build_benchmark(bench, gen_out);
      std::cout << "wrote " << s.source_pairs << " source pairs, " << s.target_partials << " target partials, "
                << s.eval_pairs << " eval pairs to " << gen_out << '\n';
    } else if (*tr) {
      TrainConfig cfg = tr_config.empty() ? TrainConfig{} : load_config(tr_config);
      for (const auto& a : ablations) apply_ablation(cfg, a);
      if (!head_name.empty()) cfg.model.head = head::parse_refiner(head_name);
      if (tr_seed) cfg.seed = *tr_seed;
      cfg.validate();
      fs::create_directories(tr_out);
      write_text(tr_out / "config.txt", format_config(cfg));
      const auto r = train::train(cfg, tr_data, tr_out, tr_resume, &std::cout);
      std::cout << "steps " << r.steps << "  final CD x1e4 " << r.final_eval_cd << "  best " << r.best_eval_cd
                << '\n';
    } else if (*ev) {
      const auto trainer = train::Trainer::load_checkpoint(ev_ckpt);
      const auto metrics = eval::parse_metrics(ev_metrics);
      const auto samples = load_split(resolve_eval_split(ev_data), true);
      const Model& model = trainer->model();
      const auto table = eval::evaluate([&](const PointCloud& p) { return model.complete(p); }, samples, metrics);
      if (!ev_out.empty()) write_text(ev_out, table.to_csv());
      std::cout << table.to_text();
    } else if (*pr) {
      const auto trainer = train::Trainer::load_checkpoint(pr_ckpt);
      const auto source = load_split(pr_source, false);
      const auto target = load_split(pr_target, false);
      const auto report = eval::probe_alignment(trainer->model(), source, target, pr_seed);
      write_text(pr_out, report.to_csv());
      std::cout << "probe accuracy " << report.accuracy << " (" << report.test_count << " held-out samples)\n";
    } else if (*co) {
      const auto trainer = train::Trainer::load_checkpoint(co_ckpt);
      const auto out = trainer->model().complete(io::read_cloud(co_in));
      io::write_cloud(out, co_out);
      std::cout << "wrote " << out.size() << " points to " << co_out << '\n';
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
