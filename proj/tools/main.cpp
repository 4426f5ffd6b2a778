#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "threatlang/analysis.hpp"
#include "threatlang/dsl.hpp"
#include "threatlang/errors.hpp"
#include "threatlang/grammar.hpp"
#include "threatlang/ingest.hpp"
#include "threatlang/ttc.hpp"

namespace {

using namespace threatlang;
using ordered = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Write via a temp file and rename so failures never leave partial output.
void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + path);
        out << content;
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw Error("write failed: " + path);
        }
    }
    fs::rename(tmp, target);
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) std::cout << content;
    else write_file_atomic(out_path, content);
}

int default_workers() {
    if (const char* env = std::getenv("THREATLANG_WORKERS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    return 1;
}

// ---- subcommand bodies ----

int cmd_compile(const std::vector<std::string>& lang_paths, const std::string& model_path,
                const std::string& out_path) {
    std::vector<LanguageSpec> specs;
    for (const std::string& p : lang_paths) specs.push_back(parse_language(read_file(p)));
    LanguageSpec spec = merge_languages(specs);
    SystemModel model = parse_model(read_file(model_path), spec);
    AttackGraph graph = compile(spec, model);
    emit(out_path, export_json(graph));
    return 0;
}

int cmd_simulate(const std::string& graph_path, uint64_t trials, uint64_t seed,
                 std::optional<double> horizon, const std::string& out_path,
                 const std::string& summary_path, int workers) {
    AttackGraph graph = import_json(read_file(graph_path));
    SimulationReport report = monte_carlo(graph, trials, seed, {}, workers);
    report.horizon = horizon;
    emit(out_path, report_to_json(report));
    if (!summary_path.empty()) write_file_atomic(summary_path, report_summary_csv(report));
    return 0;
}

int cmd_analyze(const std::string& graph_path, const std::string& kind, const std::string& target,
                const std::string& mode, uint64_t trials, uint64_t seed, std::optional<double> horizon,
                const std::string& out_path, int workers) {
    AttackGraph graph = import_json(read_file(graph_path));

    if (kind == "critical-path") {
        std::map<std::string, double> locals;
        for (const StepNode& s : graph.steps()) locals[s.id] = s.ttc.mean();
        CriticalPath cp = critical_path(graph, target, locals);
        ordered doc;
        doc["target"] = target;
        doc["path"] = cp.path;
        doc["cost"] = cp.cost;
        emit(out_path, doc.dump(2) + "\n");
        return 0;
    }
    if (kind == "critical-steps") {
        auto ranked = critical_steps(graph, target, trials, seed, workers);
        ordered doc = ordered::array();
        for (const StepFrequency& f : ranked) {
            ordered j;
            j["step"] = f.step;
            j["frequency"] = f.frequency;
            doc.push_back(std::move(j));
        }
        emit(out_path, doc.dump(2) + "\n");
        return 0;
    }
    if (kind == "min-cut") {
        CutMode m = mode == "greedy" ? CutMode::Greedy : CutMode::Exact;
        auto cut = min_defense_cut(graph, target, m);
        ordered doc;
        doc["target"] = target;
        doc["mode"] = mode;
        doc["defenses"] = cut;
        emit(out_path, doc.dump(2) + "\n");
        return 0;
    }
    if (kind == "risk") {
        if (!horizon) throw Error("--horizon is required for the risk report");
        SimulationReport report = monte_carlo(graph, trials, seed, {}, workers);
        RiskMatrix m = risk_matrix(report, *horizon);
        emit(out_path, risk_matrix_to_json(m, *horizon));
        return 0;
    }
    throw Error("unknown report kind: " + kind);
}

int cmd_export(const std::string& graph_path, const std::string& format, const std::string& view,
               size_t cap, const std::string& out_path) {
    AttackGraph graph = import_json(read_file(graph_path));
    if (view == "graph") {
        emit(out_path, export_graph(graph, format));
    } else if (view == "state") {
        emit(out_path, export_view(to_state_enumeration(graph, cap), format));
    } else if (view == "condition") {
        emit(out_path, export_view(to_condition_view(graph), format));
    } else {
        throw Error("unknown view: " + view);
    }
    return 0;
}

int cmd_grammar_sample(const std::string& grammar_path, uint64_t seed, int max_depth,
                       const std::string& out_path) {
    Grammar g = Grammar::from_text(read_file(grammar_path));
    SampleResult r = sample(g, seed, max_depth);
    ordered doc;
    doc["string"] = g.to_text(r.string);
    doc["probability"] = r.probability;
    doc["tree"] = tree_to_text(g, r.tree.root);
    emit(out_path, doc.dump(2) + "\n");
    return 0;
}

int cmd_grammar_parse(const std::string& grammar_path, const std::string& input,
                      const std::string& strategy, size_t max_trees, const std::string& out_path) {
    Grammar g = Grammar::from_text(read_file(grammar_path));
    ParseLimits limits;
    limits.max_trees = max_trees;
    auto tokens = g.tokenize(input);
    ParseForest forest = strategy == "bottom-up" ? parse_bottom_up(g, tokens, limits)
                                                 : parse_top_down(g, tokens, limits);
    ordered doc;
    doc["input"] = input;
    doc["member"] = !forest.trees.empty();
    doc["tree_count"] = forest.trees.size();
    doc["truncated"] = forest.truncated;
    ordered trees = ordered::array();
    for (const ParseTree& t : forest.trees) trees.push_back(tree_to_text(g, t.root));
    doc["trees"] = std::move(trees);
    emit(out_path, doc.dump(2) + "\n");
    return 0;
}

int cmd_grammar_prob(const std::string& grammar_path, const std::string& input,
                     const std::string& out_path) {
    Grammar g = Grammar::from_text(read_file(grammar_path));
    double p = string_probability(g, g.tokenize(input));
    ordered doc;
    doc["input"] = input;
    doc["probability"] = p;
    emit(out_path, doc.dump(2) + "\n");
    return 0;
}

int cmd_ingest(const std::string& catalog_path, const std::string& asset, const std::string& map_path,
               const std::string& out_path) {
    TechniqueCatalog catalog = load_catalog(read_file(catalog_path));
    GenerateOverrides overrides;
    if (!map_path.empty()) overrides = load_overrides(read_file(map_path));
    emit(out_path, generate_language(catalog, asset, overrides));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"threatlang: attack-graph threat modeling toolkit"};
    app.require_subcommand(1);

    // compile
    auto* compile_cmd = app.add_subcommand("compile", "Compile DSL sources and a model to a graph");
    std::vector<std::string> lang_paths;
    std::string model_path, out_path;
    compile_cmd->add_option("--lang", lang_paths, "DSL source file (repeatable)")->required();
    compile_cmd->add_option("--model", model_path, "system model JSON")->required();
    compile_cmd->add_option("--out", out_path, "output graph JSON");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo TTC simulation");
    std::string sim_graph, sim_out, sim_summary;
    uint64_t sim_trials = 1000, sim_seed = 0;
    double sim_horizon = -1.0;
    int sim_workers = default_workers();
    sim_cmd->add_option("--graph", sim_graph, "graph JSON")->required();
    sim_cmd->add_option("--trials", sim_trials, "number of trials");
    sim_cmd->add_option("--seed", sim_seed, "master seed");
    sim_cmd->add_option("--horizon", sim_horizon, "time horizon recorded in the report");
    sim_cmd->add_option("--out", sim_out, "output report JSON");
    sim_cmd->add_option("--summary", sim_summary, "also write a summary CSV here");
    sim_cmd->add_option("--workers", sim_workers, "worker threads (never changes output bytes)");

    // analyze
    auto* an_cmd = app.add_subcommand("analyze", "Graph analyses");
    std::string an_graph, an_report, an_target, an_mode = "exact", an_out;
    uint64_t an_trials = 1000, an_seed = 0;
    double an_horizon = -1.0;
    int an_workers = default_workers();
    an_cmd->add_option("--graph", an_graph, "graph JSON")->required();
    an_cmd->add_option("--report", an_report, "critical-steps|critical-path|min-cut|risk")->required();
    an_cmd->add_option("--target", an_target, "target step id");
    an_cmd->add_option("--mode", an_mode, "min-cut mode: exact|greedy");
    an_cmd->add_option("--trials", an_trials, "trials for Monte Carlo reports");
    an_cmd->add_option("--seed", an_seed, "seed for Monte Carlo reports");
    an_cmd->add_option("--horizon", an_horizon, "horizon for the risk report");
    an_cmd->add_option("--out", an_out, "output file");
    an_cmd->add_option("--workers", an_workers, "worker threads");

    // export
    auto* ex_cmd = app.add_subcommand("export", "Export a graph or a derived view");
    std::string ex_graph, ex_format, ex_view = "graph", ex_out;
    size_t ex_cap = 10000;
    ex_cmd->add_option("--graph", ex_graph, "graph JSON")->required();
    ex_cmd->add_option("--format", ex_format, "dot|json")->required();
    ex_cmd->add_option("--view", ex_view, "graph|state|condition");
    ex_cmd->add_option("--cap", ex_cap, "vertex cap for the state view");
    ex_cmd->add_option("--out", ex_out, "output file");

    // grammar
    auto* gr_cmd = app.add_subcommand("grammar", "Formal grammar utilities");
    gr_cmd->require_subcommand(1);
    std::string gr_path, gr_input, gr_out, gr_strategy = "top-down";
    uint64_t gr_seed = 0;
    int gr_depth = 64;
    size_t gr_max_trees = 1000;
    auto* gr_sample = gr_cmd->add_subcommand("sample", "Draw a string from a stochastic grammar");
    gr_sample->add_option("--grammar", gr_path, "grammar file")->required();
    gr_sample->add_option("--seed", gr_seed, "seed");
    gr_sample->add_option("--max-depth", gr_depth, "derivation depth limit");
    gr_sample->add_option("--out", gr_out, "output file");
    auto* gr_parse = gr_cmd->add_subcommand("parse", "Parse a string");
    gr_parse->add_option("--grammar", gr_path, "grammar file")->required();
    gr_parse->add_option("--input", gr_input, "input string")->required();
    gr_parse->add_option("--strategy", gr_strategy, "top-down|bottom-up");
    gr_parse->add_option("--max-trees", gr_max_trees, "forest size limit");
    gr_parse->add_option("--out", gr_out, "output file");
    auto* gr_prob = gr_cmd->add_subcommand("prob", "String probability under a stochastic grammar");
    gr_prob->add_option("--grammar", gr_path, "grammar file")->required();
    gr_prob->add_option("--input", gr_input, "input string")->required();
    gr_prob->add_option("--out", gr_out, "output file");

    // ingest
    auto* in_cmd = app.add_subcommand("ingest", "Generate DSL source from a technique catalog");
    std::string in_catalog, in_asset, in_map, in_out;
    in_cmd->add_option("--catalog", in_catalog, "catalog JSON")->required();
    in_cmd->add_option("--asset", in_asset, "generated asset name")->required();
    in_cmd->add_option("--map", in_map, "per-technique kind/TTC override JSON");
    in_cmd->add_option("--out", in_out, "output DSL file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (app.got_subcommand(compile_cmd)) return cmd_compile(lang_paths, model_path, out_path);
        if (app.got_subcommand(sim_cmd))
            return cmd_simulate(sim_graph, sim_trials, sim_seed,
                                sim_horizon >= 0 ? std::optional<double>(sim_horizon) : std::nullopt,
                                sim_out, sim_summary, sim_workers);
        if (app.got_subcommand(an_cmd)) {
            if (an_report != "risk" && an_target.empty()) {
                std::cerr << "--target is required for " << an_report << " reports\n";
                return 2;
            }
            return cmd_analyze(an_graph, an_report, an_target, an_mode, an_trials, an_seed,
                               an_horizon >= 0 ? std::optional<double>(an_horizon) : std::nullopt,
                               an_out, an_workers);
        }
        if (app.got_subcommand(ex_cmd)) return cmd_export(ex_graph, ex_format, ex_view, ex_cap, ex_out);
        if (app.got_subcommand(gr_cmd)) {
            if (gr_cmd->got_subcommand(gr_sample))
                return cmd_grammar_sample(gr_path, gr_seed, gr_depth, gr_out);
            if (gr_cmd->got_subcommand(gr_parse))
                return cmd_grammar_parse(gr_path, gr_input, gr_strategy, gr_max_trees, gr_out);
            if (gr_cmd->got_subcommand(gr_prob)) return cmd_grammar_prob(gr_path, gr_input, gr_out);
        }
        if (app.got_subcommand(in_cmd)) return cmd_ingest(in_catalog, in_asset, in_map, in_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "no subcommand\n";
    return 2;
}
