#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distreal/experiment.hpp"
#include "distreal/report.hpp"
#include "distreal/resource_sim.hpp"
#include "distreal/svg.hpp"

namespace fs = std::filesystem;
using namespace distreal;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string output_dir;
    std::uint64_t master_seed = 0;
    bool has_seed = false;
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = load_config(opts.config_path);
    if (opts.has_seed) cfg.master_seed = opts.master_seed;
    if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
    if (const char* env = std::getenv("DISTREAL_OUT"); env && *env) cfg.output_dir = env;
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

int cmd_dse(const CommonOpts& opts, int generations_override) {
    ExperimentConfig cfg = resolve_config(opts);
    if (generations_override > 0) cfg.dse.generations = generations_override;

    Environment env = build_environment(cfg);
    std::fprintf(stderr, "dse: %d genes, population %d, %d generations\n",
                 env.net.conv_count(), cfg.dse.population, cfg.dse.generations);
    DseArtifacts art = run_dse(env, cfg);

    const std::string lut_path = join(cfg.output_dir, "lut.bin");
    save_lut(art.result.lut, lut_path);
    export_lut_csv(art.result.lut, join(cfg.output_dir, "lut.csv"));
    write_generation_csv(art.result, join(cfg.output_dir, "dse_generations.csv"));
    write_uniform_curve_csv(art.uniform_curve, join(cfg.output_dir, "dse_uniform_curve.csv"));

    std::vector<Individual> front;
    const auto& final_pop = art.result.generations.back();
    for (const auto& e : art.result.lut.entries) {
        for (const auto& ind : final_pop)
            if (ind.macs == e.expected_fwd_macs) {
                front.push_back(ind);
                break;
            }
    }
    write_pareto_svg(front, art.uniform_curve, join(cfg.output_dir, "pareto.svg"));
    write_manifest(cfg, join(cfg.output_dir, "dse_manifest.json"));

    std::printf("wrote %s (%zu entries)\n", lut_path.c_str(), art.result.lut.entries.size());
    return 0;
}

int cmd_run(const CommonOpts& opts, const std::string& lut_override,
            const std::string& techniques_csv, int rounds_override, double lambda_override,
            bool has_lambda) {
    ExperimentConfig cfg = resolve_config(opts);
    if (!lut_override.empty()) cfg.lut_path = lut_override;
    if (rounds_override > 0) cfg.rounds = rounds_override;
    if (has_lambda) cfg.lambda_rate = lambda_override;
    if (!techniques_csv.empty()) {
        cfg.techniques.clear();
        std::string token;
        for (char ch : techniques_csv + ",") {
            if (ch == ',') {
                if (!token.empty()) cfg.techniques.push_back(token);
                token.clear();
            } else {
                token += ch;
            }
        }
    }
    cfg.validate();

    Environment env = build_environment(cfg);
    ParetoLUT lut;
    const ParetoLUT* lut_ptr = nullptr;
    bool needs_lut = false;
    for (const auto& t : cfg.techniques)
        if (technique_from_string(t) == Technique::distreal) needs_lut = true;
    if (needs_lut) {
        if (!fs::exists(cfg.lut_path)) {
            std::fprintf(stderr,
                         "error: distreal needs a LUT at '%s' but the file does not exist; "
                         "run 'distreal dse' first or pass --lut\n",
                         cfg.lut_path.c_str());
            return 1;
        }
        lut = load_lut(cfg.lut_path, &env.net);
        lut_ptr = &lut;
    }

    auto results = run_all(env, cfg, lut_ptr);
    write_convergence_csv(results, join(cfg.output_dir, "convergence.csv"));
    write_convergence_svg(results, join(cfg.output_dir, "convergence.svg"));
    write_manifest(cfg, join(cfg.output_dir, "manifest.json"));

    auto rows = summarize(results, cfg.rounds - 1);
    std::printf("%s", summary_to_text(rows).c_str());
    for (const auto& r : results)
        if (r.budget_fallbacks > 0)
            std::fprintf(stderr, "note: %s seed %llu hit %lld budget fallbacks\n",
                         technique_name(r.technique).c_str(),
                         static_cast<unsigned long long>(r.seed),
                         static_cast<long long>(r.budget_fallbacks));
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, int at_round,
               const std::string& json_out) {
    std::vector<RunResult> all;
    for (const auto& in : inputs) {
        const std::string path =
            fs::is_directory(in) ? join(in, "convergence.csv") : in;
        auto part = read_convergence_csv(path);
        all.insert(all.end(), part.begin(), part.end());
    }
    if (all.empty()) {
        std::fprintf(stderr, "error: no runs found\n");
        return 1;
    }
    auto rows = summarize(all, at_round);
    for (const auto& r : rows)
        if (r.missing_at > 0)
            std::fprintf(stderr, "warning: %d run(s) of %s lack round %d\n", r.missing_at,
                         r.technique.c_str(), at_round);
    std::printf("%s", summary_to_text(rows).c_str());
    const std::string json = summary_to_json(rows);
    if (!json_out.empty()) {
        std::ofstream os(json_out);
        if (!os) {
            std::fprintf(stderr, "error: cannot write %s\n", json_out.c_str());
            return 1;
        }
        os << json;
    } else {
        std::printf("%s", json.c_str());
    }
    return 0;
}

int cmd_trace_export(const CommonOpts& opts, const std::string& out_path) {
    ExperimentConfig cfg = resolve_config(opts);
    Environment env = build_environment(cfg);
    const int local_batches = (cfg.samples_per_device + cfg.batch_size - 1) / cfg.batch_size;
    const auto [low, high] = calibrate_range(env.net, cfg.variability, local_batches,
                                             cfg.batch_size, cfg.round_duration,
                                             cfg.training_factor);
    std::vector<ResourceTrace> traces;
    const std::uint64_t run_seed = cfg.seeds.front();
    for (int i = 0; i < cfg.devices; ++i) {
        Rng rng = make_rng(run_seed, Stream::resource_trace, {static_cast<std::uint64_t>(i)});
        traces.push_back(generate_trace(cfg.lambda_rate, low, high,
                                        cfg.rounds * cfg.round_duration, rng));
    }
    const std::string path =
        out_path.empty() ? join(cfg.output_dir, "traces.csv") : out_path;
    export_traces_csv(traces, path);
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DISTREAL-style resource-aware federated learning simulator"};
    app.require_subcommand(1);

    CommonOpts opts;
    int generations = 0, rounds = 0, at_round = -1;
    double lambda = 0.0;
    std::string lut_path, techniques, json_out, trace_out;
    std::vector<std::string> report_inputs;

    auto add_common = [&opts](CLI::App* sub) {
        sub->add_option("-c,--config", opts.config_path, "experiment config (JSON)");
        sub->add_option("-o,--output", opts.output_dir, "output directory");
        sub->add_option("--master-seed", opts.master_seed, "override master seed")
            ->each([&opts](const std::string&) { opts.has_seed = true; });
    };

    CLI::App* dse = app.add_subcommand("dse", "run the design-space exploration");
    add_common(dse);
    dse->add_option("--generations", generations, "override generation count");

    CLI::App* run = app.add_subcommand("run", "run FL experiments");
    add_common(run);
    run->add_option("--lut", lut_path, "Pareto LUT file for distreal");
    run->add_option("--techniques", techniques, "comma-separated technique list");
    run->add_option("--rounds", rounds, "override round count");
    auto* lopt = run->add_option("--lambda", lambda, "override resource change rate");

    CLI::App* report = app.add_subcommand("report", "summarize result directories");
    report->add_option("inputs", report_inputs, "result dirs or convergence CSVs")->required();
    report->add_option("--at-round", at_round, "also report accuracy at this round");
    report->add_option("--json", json_out, "write the JSON twin here");

    CLI::App* trace = app.add_subcommand("trace-export", "export resource traces as CSV");
    add_common(trace);
    trace->add_option("--out", trace_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (dse->parsed()) return cmd_dse(opts, generations);
        if (run->parsed())
            return cmd_run(opts, lut_path, techniques, rounds, lambda, lopt->count() > 0);
        if (report->parsed()) return cmd_report(report_inputs, at_round, json_out);
        if (trace->parsed()) return cmd_trace_export(opts, trace_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
