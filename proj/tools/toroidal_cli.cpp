#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "toroidal/serialize.hpp"

using namespace toroidal;

namespace {

enum ExitCode : int {
    kOk = 0,
    kParseError = 2,
    kValidationError = 3,
    kExhausted = 4,
    kOracleMismatch = 5,
};

struct CommonArgs {
    std::string scenario_path;
    std::string out_path;
    std::optional<long long> samples;
    std::optional<std::uint64_t> seed;
    std::optional<long long> budget;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool scenario_required = true) {
    auto* opt = cmd->add_option("--scenario", args.scenario_path, "scenario JSON file");
    if (scenario_required) opt->required();
    cmd->add_option("--out", args.out_path, "output path (stdout when omitted)");
    cmd->add_option("--samples", args.samples, "oracle samples per step");
    cmd->add_option("--seed", args.seed, "oracle RNG seed");
    cmd->add_option("--budget", args.budget, "blow-up budget override");
}

void emit(const CommonArgs& args, const Json& j) {
    std::string text = j.dump(2);
    text.push_back('\n');
    if (args.out_path.empty())
        std::cout << text;
    else
        write_file_atomic(args.out_path, text);
}

Scenario load(const CommonArgs& args, const std::string& expected_algorithm) {
    Scenario sc = load_scenario(args.scenario_path);
    if (!expected_algorithm.empty() && sc.algorithm != expected_algorithm)
        throw ValidationError("scenario algorithm is '" + sc.algorithm + "', expected '" +
                              expected_algorithm + "'");
    if (args.samples) sc.options.samples = *args.samples;
    if (args.seed) sc.options.seed = *args.seed;
    if (args.budget) sc.options.budget = *args.budget;
    return sc;
}

int run_lemma(const CommonArgs& args, const std::string& algorithm) {
    Scenario sc = load(args, algorithm);
    EngineOptions opt;
    opt.budget = sc.options.budget;
    Trace trace = algorithm == "lemma_a" ? run_lemma_a(sc.fiber, opt) : run_lemma_b(sc.fiber, opt);

    Json out = trace_to_json(trace);
    bool mismatch = false;
    if (sc.options.samples > 0) {
        VerifyReport vr = verify_chain(trace, sc.options.samples, sc.options.seed);
        MatrixReport mr = cross_check_matrix(trace);
        out["verify"] = verify_report_to_json(vr);
        out["matrix_check"] = Json{{"ok", mr.ok}, {"steps_checked", mr.steps_checked}};
        mismatch = !vr.ok || !mr.ok;
    }
    emit(args, out);
    if (trace.outcome == Outcome::Exhausted) {
        std::cerr << "exhausted: " << trace.note << "\n";
        return kExhausted;
    }
    if (mismatch) {
        std::cerr << "oracle mismatch\n";
        return kOracleMismatch;
    }
    return kOk;
}

int run_classify(const CommonArgs& args) {
    Scenario sc = load(args, "classify");
    Json forms = Json::array();
    bool all_prepared = true;
    for (const auto& e : sc.fiber.entries) {
        Classification c = classify_prepared(e.form);
        all_prepared = all_prepared && c.prepared;
        Json fj{{"id", e.id}, {"classification", classification_to_json(c)}};
        // pair verdicts for the declared parameter pairs
        if (auto pc = classify_toroidal_pair(e.form, 0, 1))
            fj["pair_uv"] = pair_case_name(pc->kind);
        if (auto mc = classify_toroidal_morphism(e.form))
            fj["morphism_case"] = mc->case_index;
        forms.push_back(std::move(fj));
    }
    Json out{{"algorithm", "classify"},
             {"outcome", all_prepared ? "all_prepared" : "classified"},
             {"forms", forms}};
    if (sc.scene) {
        CuspidalReport r = check_cuspidal(*sc.scene);
        out["cuspidal"] = Json{{"cuspidal", r.cuspidal},
                               {"strongly_cuspidal", r.strongly_cuspidal},
                               {"offending", r.offending}};
    }
    emit(args, out);
    return kOk;
}

int run_valuation(const CommonArgs& args) {
    Scenario sc = load(args, "valuation");
    if (!sc.valuation) throw ValidationError("valuation scenario needs a 'valuation' section");
    EngineOptions opt;
    opt.budget = sc.options.budget;
    Trace trace = resolve_dependent_valuation(*sc.valuation, opt);
    emit(args, trace_to_json(trace));
    if (trace.outcome == Outcome::Exhausted) return kExhausted;
    return kOk;
}

int run_verify(const CommonArgs& args) {
    Scenario sc = load(args, "verify");
    Json tj;
    if (sc.trace) {
        tj = *sc.trace;
    } else if (!sc.trace_path.empty()) {
        std::ifstream in(sc.trace_path);
        if (!in) throw ParseError("cannot open trace file: " + sc.trace_path);
        in >> tj;
    } else {
        throw ValidationError("verify scenario needs 'trace' or 'trace_path'");
    }
    Trace trace = trace_from_json(tj);
    long long samples = sc.options.samples > 0 ? sc.options.samples : 100;
    VerifyReport vr = verify_chain(trace, samples, sc.options.seed);
    MatrixReport mr = cross_check_matrix(trace);
    Json out = verify_report_to_json(vr);
    out["matrix_check"] = Json{{"ok", mr.ok}, {"steps_checked", mr.steps_checked}};
    emit(args, out);
    if (!vr.ok || !mr.ok) {
        std::cerr << "oracle mismatch (" << vr.mismatches.size() << " witnesses)\n";
        return kOracleMismatch;
    }
    return kOk;
}

int run_case_table(const CommonArgs& args, const std::string& which) {
    std::string text;
    if (which == "a" || which == "A")
        text = render_case_table('A');
    else if (which == "b" || which == "B")
        text = render_case_table('B');
    else
        text = render_case_table('A') + "\n" + render_case_table('B');
    if (args.out_path.empty())
        std::cout << text;
    else
        write_file_atomic(args.out_path, text);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local monomial forms of morphisms of 3-folds: blow-up chart calculus, "
                 "catalog classification, invariant-driven preparation, exact verification"};
    app.require_subcommand(1);

    CommonArgs classify_args, lemma_a_args, lemma_b_args, valuation_args, verify_args, table_args;
    std::string table_which = "all";

    auto* c_classify = app.add_subcommand("classify", "classify fiber forms against the catalogs");
    add_common(c_classify, classify_args);
    auto* c_lemma_a = app.add_subcommand("lemma-a", "blow-up of a 2-point of the target");
    add_common(c_lemma_a, lemma_a_args);
    auto* c_lemma_b = app.add_subcommand("lemma-b", "blow-up of a curve through a 1-point");
    add_common(c_lemma_b, lemma_b_args);
    auto* c_valuation = app.add_subcommand("valuation", "subtractive 2-curve descent for a pair of values");
    add_common(c_valuation, valuation_args);
    auto* c_verify = app.add_subcommand("verify", "re-check a trace by exact random sampling");
    add_common(c_verify, verify_args);
    auto* c_table = app.add_subcommand("case-table", "render the golden case tables as markdown");
    add_common(c_table, table_args, false);
    c_table->add_option("which", table_which, "a, b or all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_classify->parsed()) return run_classify(classify_args);
        if (c_lemma_a->parsed()) return run_lemma(lemma_a_args, "lemma_a");
        if (c_lemma_b->parsed()) return run_lemma(lemma_b_args, "lemma_b");
        if (c_valuation->parsed()) return run_valuation(valuation_args);
        if (c_verify->parsed()) return run_verify(verify_args);
        if (c_table->parsed()) return run_case_table(table_args, table_which);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParseError;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidationError;
    } catch (const EngineError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidationError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kParseError;
    }
    return kOk;
}
