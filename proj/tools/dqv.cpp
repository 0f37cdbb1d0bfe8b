// dqv: command-line front end for the validation workflow.
//
// Exit codes: 0 success, 1 validation mismatch / detection regression /
// failing tests / unstable C5, 2 operational failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dq/orchestrator.hpp"

namespace {

using namespace dq;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kOperational = 2;

struct Globals {
  std::string config;
  std::optional<uint64_t> seed;
  std::string provider;
  std::string mock_profile;
  std::string output_dir;
};

orch::Config resolve_config(const Globals& g) {
  orch::Config c = g.config.empty() ? orch::Config{} : orch::load_config(g.config);
  if (!g.output_dir.empty()) c.output_dir = g.output_dir;
  if (g.seed) c.seed = *g.seed;
  if (!g.provider.empty()) c.provider = g.provider;
  if (!g.mock_profile.empty()) c.mock_profile = g.mock_profile;
  // Paths left unset in the config follow --output-dir.
  return orch::with_defaults(c);
}

std::string tally(const anomaly::Tally& t) {
  return std::to_string(t.detected) + "/" + std::to_string(t.total);
}

void print_tests(const engine::TestRunReport& r) {
  for (const auto& t : r.results) {
    if (t.status == engine::Status::pass) continue;
    std::printf("  %-5s %s", engine::status_name(t.status), t.test_id.c_str());
    if (t.failing_rows) std::printf(" (%lld rows)", static_cast<long long>(*t.failing_rows));
    if (!t.message.empty()) std::printf(": %s", t.message.c_str());
    std::printf("\n");
  }
  std::printf("tests: %d passed, %d failed, %d errors\n", r.passed, r.failed, r.errored);
}

void print_comparator(const anomaly::ComparatorReport& r) {
  for (auto cond : anomaly::kConditions) {
    const auto& m = r.matrix(cond);
    std::printf("%-16s", anomaly::condition_name(cond));
    for (const auto& [batch, t] : m.batches) std::printf("  %c %s", batch, tally(t).c_str());
    std::printf("  total %s\n", tally(m.total).c_str());
  }
  if (r.absolute_gain_pp) std::printf("absolute gain: %+.2f pp\n", *r.absolute_gain_pp);
  if (r.relative_improvement_pct) std::printf("relative improvement: %+.2f%%\n", *r.relative_improvement_pct);
}

void print_crossstore(const xstore::CrossStoreReport& r) {
  for (const auto& t : r.tables) {
    std::printf("%-22s %s", t.table.c_str(), xstore::verdict_name(t.status));
    for (const auto& f : t.failures) std::printf(" %s", f.c_str());
    if (!t.row_diffs.empty()) std::printf(" (%zu row diffs)", t.row_diffs.size());
    std::printf("\n");
  }
  std::printf("cross-store: %s %d/%zu\n", xstore::verdict_name(r.status), r.matched(), r.tables.size());
}

void print_audit(const synth::AuditReport& r) {
  auto line = [](const std::string& label, const synth::AuditCounts& c) {
    std::printf("%-22s useful %d  redundant %d  low_value %d  invalid %d\n", label.c_str(), c.useful,
                c.redundant, c.low_value, c.invalid);
  };
  for (const auto& [model, counts] : r.per_model) line(model, counts);
  line("total (" + std::to_string(r.totals.total()) + ")", r.totals);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-layer data-quality validation workflow"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "YAML config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Dataset and generation seed");
  app.add_option("--provider", g.provider, "Test generation provider")
      ->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--mock-profile", g.mock_profile, "Mock provider profile")
      ->check(CLI::IsMember({"standard", "degenerate_seed3"}));
  app.add_option("--output-dir", g.output_dir, "Artifact directory");

  auto* full = app.add_subcommand("full-run", "Run all eight stages");
  auto* ingest = app.add_subcommand("ingest", "Generate and persist the raw season");
  auto* models = app.add_subcommand("run-models", "Materialize models with a full refresh");
  auto* test = app.add_subcommand("test", "Execute a schema's tests against the local store");
  std::string schema_file;
  test->add_option("--schema", schema_file, "Schema file (default: active schema)")->check(CLI::ExistingFile);
  auto* gen = app.add_subcommand("generate-tests", "Generate candidate tests");
  auto* migrate = app.add_subcommand("migrate", "Copy curated models to the warehouse");
  auto* validate = app.add_subcommand("validate", "Compare local and warehouse tables");
  auto* experiment = app.add_subcommand("experiment", "Run the anomaly comparator");
  std::string catalog;
  experiment->add_option("--catalog", catalog, "Anomaly catalog JSON")->check(CLI::ExistingFile);
  auto* c5 = app.add_subcommand("c5", "Repeated-trial stability protocol");
  std::string mode;
  int trials = 5;
  bool per_trial_seeds = false;
  c5->add_option("--mode", mode, "frozen or fresh")->required()->check(CLI::IsMember({"frozen", "fresh"}));
  c5->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
  c5->add_flag("--per-trial-seeds", per_trial_seeds, "Fresh mode: trial i generates with seed i");
  auto* audit = app.add_subcommand("audit", "Classify generated tests");
  auto* report = app.add_subcommand("report", "Recompile the research summary from artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kOperational;
  }

  try {
    orch::Config c = resolve_config(g);
    if (!catalog.empty()) c.anomaly_catalog = catalog;

    if (full->parsed()) {
      orch::WorkflowResult r;
      try {
        r = orch::run_workflow(c);
      } catch (const orch::StageFailure& e) {
        std::cerr << "dqv: " << e.what() << "\n";
        return kOperational;
      }
      for (const auto& s : r.log.stages)
        std::printf("%d %-22s %10.3f ms\n", s.ordinal, s.name.c_str(), s.duration_ms());
      std::printf("total %.3f ms\n", r.log.total_duration_ms());
      std::printf("summary: %s\n", orch::paths_for(c).research_summary.c_str());
      if (r.mismatch) std::fprintf(stderr, "dqv: cross-store MISMATCH\n");
      if (r.regression) std::fprintf(stderr, "dqv: detection regression\n");
      return r.mismatch || r.regression ? kValidation : kOk;
    }

    if (c5->parsed()) {
      auto m = mode == "frozen" ? orch::C5Mode::frozen : orch::C5Mode::fresh;
      auto r = orch::run_c5(c, m, trials, per_trial_seeds);
      for (const auto& t : r.trials) {
        if (t.totals)
          std::printf("trial %d seed %llu: %s %s %s\n", t.index, static_cast<unsigned long long>(t.seed),
                      tally(t.totals->manual_only).c_str(), tally(t.totals->manual_expanded).c_str(),
                      tally(t.totals->manual_llm).c_str());
        else
          std::printf("trial %d seed %llu: error: %s\n", t.index, static_cast<unsigned long long>(t.seed),
                      t.error.c_str());
      }
      std::printf("%s: %zu/%zu stable\n", orch::c5_mode_name(m), r.trials.size() - r.deviating_trials.size(),
                  r.trials.size());
      return r.stable ? kOk : kValidation;
    }

    orch::RunLock lock(c.output_dir);
    if (ingest->parsed()) {
      orch::ingest(c);
      std::printf("wrote %s\n", orch::paths_for(c).raw_matches.c_str());
    } else if (models->parsed()) {
      auto r = orch::build_models(c);
      for (const auto& m : r.models) std::printf("%-22s %lld rows\n", m.model.c_str(), static_cast<long long>(m.rows));
    } else if (test->parsed()) {
      std::optional<fs::path> file;
      if (!schema_file.empty()) file = schema_file;
      auto r = orch::run_tests(c, file);
      print_tests(r);
      return r.failed + r.errored > 0 ? kValidation : kOk;
    } else if (gen->parsed()) {
      auto r = orch::generate(c);
      for (const auto& m : r.per_model) std::printf("%-22s %d items, %d valid\n", m.model.c_str(), m.items, m.valid);
    } else if (migrate->parsed()) {
      auto r = orch::migrate(c);
      for (const auto& t : r.tables)
        std::printf("%-22s %lld -> %lld rows\n", t.table.c_str(), static_cast<long long>(t.rows_exported),
                    static_cast<long long>(t.rows_loaded));
    } else if (validate->parsed()) {
      auto r = orch::validate(c);
      print_crossstore(r);
      return r.status == xstore::Verdict::match ? kOk : kValidation;
    } else if (experiment->parsed()) {
      auto r = orch::experiment(c);
      print_comparator(r);
      return orch::detection_regression(r) ? kValidation : kOk;
    } else if (audit->parsed()) {
      print_audit(orch::audit(c));
    } else if (report->parsed()) {
      std::cout << orch::write_summary(c).dump(2) << "\n";
    }
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "dqv: " << e.what() << "\n";
    return kOperational;
  }
}
