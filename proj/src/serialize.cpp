#include "toroidal/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace toroidal {

namespace {

int coord_index(const std::string& name, const std::string& path) {
    for (int j = 0; j < 3; ++j)
        if (name == kCoordNames[j]) return j;
    throw ParseError(path + ": unknown coordinate '" + name + "'");
}

int param_index(const std::string& name, const std::string& path) {
    for (int i = 0; i < 3; ++i)
        if (name == kParamNames[i]) return i;
    throw ParseError(path + ": unknown parameter '" + name + "'");
}

ConstStatus status_from(const std::string& s, const std::string& path) {
    if (s == "zero") return ConstStatus::Zero;
    if (s == "nonzero") return ConstStatus::Nonzero;
    if (s == "generic") return ConstStatus::Generic;
    throw ParseError(path + ": unknown constant status '" + s + "'");
}

Vec3 vec_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw ParseError(path + ": expected a 3-vector");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
        if (!j[k].is_number_integer()) throw ParseError(path + ": exponent is not an integer");
        v[k] = j[k].get<Exp>();
    }
    return v;
}

Json vec_to_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

Json mat_to_json(const Mat3& m) {
    return Json::array({vec_to_json(m[0]), vec_to_json(m[1]), vec_to_json(m[2])});
}

Mat3 mat_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw ParseError(path + ": expected a 3x3 matrix");
    return {vec_from_json(j[0], path), vec_from_json(j[1], path), vec_from_json(j[2], path)};
}

Json constant_to_json(const ConstantClass& c) {
    return Json{{"label", c.label}, {"status", status_name(c.status)}};
}

ConstantClass constant_from_json(const Json& j, const std::string& path) {
    ConstantClass c;
    if (j.is_string()) {
        c.label = j.get<std::string>();
        c.status = ConstStatus::Nonzero;
        return c;
    }
    c.label = j.value("label", "");
    c.status = status_from(j.value("status", "nonzero"), path);
    return c;
}

Json translate_to_json(const TranslatePart& t) {
    Json j{{"coord", kCoordNames[t.coord]}, {"constant", t.constant.label},
           {"status", status_name(t.constant.status)}};
    if (t.power != 1) j["power"] = t.power;
    return j;
}

TranslatePart translate_from_json(const Json& j, const std::string& path) {
    TranslatePart t;
    t.coord = coord_index(j.value("coord", "y"), path);
    t.constant.label = j.value("constant", "alpha");
    t.constant.status = status_from(j.value("status", "nonzero"), path);
    t.power = j.value("power", (Exp)1);
    return t;
}

Json arg_to_json(const SeriesArg& a) {
    Json j{{"exponents", vec_to_json(a.exponents)}};
    if (!a.translates.empty()) {
        Json ts = Json::array();
        for (const auto& t : a.translates) ts.push_back(translate_to_json(t));
        j["translates"] = ts;
    }
    return j;
}

SeriesArg arg_from_json(const Json& j, const std::string& path) {
    SeriesArg a;
    if (j.is_string()) {
        a.exponents[coord_index(j.get<std::string>(), path)] = 1;
        return a;
    }
    if (j.contains("exponents")) a.exponents = vec_from_json(j["exponents"], path);
    if (j.contains("translates"))
        for (const auto& t : j["translates"]) a.translates.push_back(translate_from_json(t, path));
    return a;
}

Json factor_to_json(const RowFactor& f) {
    if (f.trivial()) return Json("trivial");
    Json parts = Json::array();
    if (f.centered) parts.push_back(Json{{"centered", true}});
    for (const auto& t : f.translates) parts.push_back(Json{{"translate", translate_to_json(t)}});
    for (const auto& u : f.units) {
        Json args = Json::array();
        for (const auto& a : u.args) args.push_back(arg_to_json(a));
        Json su{{"symbol", u.symbol}, {"args", args}};
        if (u.power != 1) su["power"] = u.power;
        parts.push_back(Json{{"unit_series", su}});
    }
    if (f.mixed) {
        Json ga = Json::array();
        for (const auto& a : f.mixed->gamma_args) ga.push_back(arg_to_json(a));
        Json mj{{"gamma_args", ga}, {"tail", vec_to_json(f.mixed->tail_exponents)}};
        if (f.mixed->tail_coord) mj["tail_coord"] = kCoordNames[*f.mixed->tail_coord];
        parts.push_back(Json{{"mixed", mj}});
    }
    return parts;
}

void factor_part_from_json(const Json& j, RowFactor& f, const std::string& path) {
    if (j.contains("centered")) {
        f.centered = j["centered"].get<bool>();
    } else if (j.contains("translate")) {
        f.translates.push_back(translate_from_json(j["translate"], path));
    } else if (j.contains("unit_series")) {
        const Json& su = j["unit_series"];
        UnitSeriesPart u;
        u.symbol = su.value("symbol", "gamma");
        u.power = su.value("power", (Exp)1);
        if (su.contains("vars")) {
            for (const auto& v : su["vars"]) {
                SeriesArg a;
                a.exponents[coord_index(v.get<std::string>(), path)] = 1;
                u.args.push_back(a);
            }
        }
        if (su.contains("args"))
            for (const auto& a : su["args"]) u.args.push_back(arg_from_json(a, path));
        f.units.push_back(std::move(u));
    } else if (j.contains("mixed")) {
        const Json& mj = j["mixed"];
        MixedSeries m;
        if (mj.contains("gamma_args"))
            for (const auto& a : mj["gamma_args"]) m.gamma_args.push_back(arg_from_json(a, path));
        if (mj.contains("tail")) m.tail_exponents = vec_from_json(mj["tail"], path);
        if (mj.contains("tail_coord"))
            m.tail_coord = coord_index(mj["tail_coord"].get<std::string>(), path);
        f.mixed = std::move(m);
    } else {
        throw ParseError(path + ": unknown factor part");
    }
}

RowFactor factor_from_json(const Json& j, const std::string& path) {
    RowFactor f;
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "trivial") return f;
        if (s == "unit") {
            f.units.push_back(UnitSeriesPart{"gamma", {}, 1});
            return f;
        }
        throw ParseError(path + ": unknown factor '" + s + "'");
    }
    if (j.is_array()) {
        for (const auto& p : j) factor_part_from_json(p, f, path);
        return f;
    }
    factor_part_from_json(j, f, path);
    return f;
}

}  // namespace

Json form_to_json(const LocalForm& form) {
    Json rows = Json::array();
    Json factors = Json::array();
    for (int i = 0; i < 3; ++i) {
        rows.push_back(vec_to_json(form.exponents[i]));
        factors.push_back(factor_to_json(form.factors[i]));
    }
    Json du = Json::array(), dd = Json::array();
    for (int j = 0; j < 3; ++j)
        if (form.divisor_up[j]) du.push_back(kCoordNames[j]);
    for (int i = 0; i < 3; ++i)
        if (form.divisor_down[i]) dd.push_back(kParamNames[i]);
    return Json{{"upstairs", form.upstairs}, {"downstairs", form.downstairs},
                {"rows", rows},             {"factors", factors},
                {"divisor_up", du},         {"divisor_down", dd}};
}

LocalForm form_from_json(const Json& j, const std::string& path) {
    LocalForm f;
    if (!j.contains("rows")) throw ParseError(path + ": missing 'rows'");
    const Json& rows = j["rows"];
    if (!rows.is_array() || rows.size() != 3) throw ParseError(path + ": 'rows' must have 3 rows");
    for (int i = 0; i < 3; ++i)
        f.exponents[i] = vec_from_json(rows[i], path + ".rows[" + std::to_string(i) + "]");
    if (j.contains("factors")) {
        const Json& fs = j["factors"];
        if (!fs.is_array() || fs.size() != 3)
            throw ParseError(path + ": 'factors' must have 3 entries");
        for (int i = 0; i < 3; ++i)
            f.factors[i] = factor_from_json(fs[i], path + ".factors[" + std::to_string(i) + "]");
    }
    for (const auto& c : j.value("divisor_up", Json::array()))
        f.divisor_up[coord_index(c.get<std::string>(), path)] = true;
    for (const auto& p : j.value("divisor_down", Json::array()))
        f.divisor_down[param_index(p.get<std::string>(), path)] = true;
    f.upstairs = j.value("upstairs", f.count_up());
    f.downstairs = j.value("downstairs", f.count_down());
    return f;
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

Scenario parse_scenario(const Json& j) {
    Scenario sc;
    if (!j.is_object()) throw ParseError("scenario: top level must be an object");
    sc.version = j.value("version", 1);
    if (sc.version != 1) throw ParseError("scenario: unsupported version");
    if (!j.contains("algorithm")) throw ParseError("scenario: missing 'algorithm'");
    sc.algorithm = j["algorithm"].get<std::string>();

    if (j.contains("fiber")) {
        int next_id = 0;
        for (const auto& e : j["fiber"]) {
            FiberEntry entry;
            std::string path = "fiber[" + std::to_string(next_id) + "]";
            entry.id = e.value("id", next_id);
            entry.form = form_from_json(e, path);
            if (e.contains("locus")) entry.locus_tag = e["locus"].get<int>();
            auto violations = validate(entry.form);
            if (!violations.empty())
                throw ValidationError(path + ": " + violations.front());
            sc.fiber.entries.push_back(std::move(entry));
            ++next_id;
        }
    }

    if (j.contains("valuation")) {
        const Json& vj = j["valuation"];
        ValuationState vs;
        auto get_value = [&vj](const char* key) {
            if (!vj.contains(key)) throw ParseError(std::string("valuation: missing '") + key + "'");
            const Json& x = vj[key];
            if (x.is_number_integer()) return rat_of(x.get<long long>());
            return rat_from_string(x.get<std::string>());
        };
        vs.values[0] = get_value("u");
        vs.values[1] = get_value("v");
        vs.declared_independent = vj.value("independent", false);
        if (vs.values[0] <= 0 || vs.values[1] <= 0)
            throw ValidationError("valuation: values must be positive");
        sc.valuation = vs;
    }

    if (j.contains("trace")) sc.trace = j["trace"];
    sc.trace_path = j.value("trace_path", "");

    if (j.contains("scene")) {
        const Json& sj = j["scene"];
        Scene scene;
        for (const auto& c : sj.value("components", Json::array())) {
            SceneComponent comp;
            comp.name = c.value("name", "");
            comp.has_3_point = c.value("has_3_point", false);
            comp.toroidal_neighborhood = c.value("toroidal_neighborhood", false);
            scene.components.push_back(std::move(comp));
        }
        for (const auto& c : sj.value("two_curves", Json::array())) {
            SceneTwoCurve tc;
            tc.name = c.value("name", "");
            if (c.contains("components") && c["components"].is_array() &&
                c["components"].size() == 2) {
                tc.component_a = c["components"][0].get<std::string>();
                tc.component_b = c["components"][1].get<std::string>();
            }
            tc.has_3_point = c.value("has_3_point", false);
            tc.toroidal_neighborhood = c.value("toroidal_neighborhood", false);
            scene.two_curves.push_back(std::move(tc));
        }
        sc.scene = std::move(scene);
    }

    if (j.contains("options")) {
        const Json& oj = j["options"];
        sc.options.budget = oj.value("budget", (long long)-1);
        sc.options.samples = oj.value("samples", (long long)0);
        sc.options.seed = oj.value("seed", (std::uint64_t)1);
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError(std::string("scenario JSON: ") + e.what());
    }
    return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

namespace {

const char* step_kind_name(StepKind k) {
    switch (k) {
        case StepKind::Substitute: return "substitute";
        case StepKind::PassToTarget: return "pass_to_target";
        case StepKind::Recenter: return "recenter";
        case StepKind::ValuationStep: return "valuation";
    }
    return "?";
}

StepKind step_kind_from(const std::string& s) {
    if (s == "substitute") return StepKind::Substitute;
    if (s == "pass_to_target") return StepKind::PassToTarget;
    if (s == "recenter") return StepKind::Recenter;
    if (s == "valuation") return StepKind::ValuationStep;
    throw ParseError("unknown step kind '" + s + "'");
}

Json center_to_json(const Center& c) {
    switch (c.kind) {
        case CenterKind::Point: return Json{{"kind", "point"}};
        case CenterKind::Curve:
            return Json{{"kind", "curve"},
                        {"coords", Json::array({kCoordNames[c.coords[0]], kCoordNames[c.coords[1]]})}};
        case CenterKind::TwoCurve:
            return Json{{"kind", "2-curve"},
                        {"coords", Json::array({kCoordNames[c.coords[0]], kCoordNames[c.coords[1]]})}};
    }
    return {};
}

Center center_from_json(const Json& j) {
    Center c;
    std::string kind = j.value("kind", "point");
    if (kind == "point") {
        c.kind = CenterKind::Point;
    } else {
        c.kind = kind == "curve" ? CenterKind::Curve : CenterKind::TwoCurve;
        if (j.contains("coords"))
            for (int i = 0; i < 2; ++i)
                c.coords[i] = coord_index(j["coords"][i].get<std::string>(), "center");
    }
    return c;
}

Json chart_to_json(const ChartSubstitution& c) {
    Json trans = Json::array();
    for (int jx = 0; jx < 3; ++jx) {
        if (c.translates[jx])
            trans.push_back(Json{{"old", kCoordNames[jx]},
                                 {"coord", kCoordNames[c.translates[jx]->new_coord]},
                                 {"constant", constant_to_json(c.translates[jx]->constant)}});
    }
    return Json{{"id", c.id}, {"monomial", mat_to_json(c.monomial)}, {"translates", trans}};
}

ChartSubstitution chart_from_json(const Json& j) {
    ChartSubstitution c;
    c.id = j.value("id", "id");
    if (j.contains("monomial")) c.monomial = mat_from_json(j["monomial"], "chart");
    for (const auto& t : j.value("translates", Json::array())) {
        int old = coord_index(t.value("old", "y"), "chart");
        ChartTranslate ct;
        ct.new_coord = coord_index(t.value("coord", "y"), "chart");
        ct.constant = constant_from_json(t["constant"], "chart");
        c.translates[old] = ct;
    }
    return c;
}

Json branch_to_json(const std::vector<BranchAssignment>& branch) {
    Json b = Json::array();
    for (const auto& a : branch)
        b.push_back(Json{{"label", a.label}, {"status", status_name(a.status)}});
    return b;
}

std::vector<BranchAssignment> branch_from_json(const Json& j) {
    std::vector<BranchAssignment> out;
    for (const auto& a : j)
        out.push_back({a.value("label", ""),
                       status_from(a.value("status", "nonzero"), "branch")});
    return out;
}

}  // namespace

Json trace_to_json(const Trace& trace) {
    Json steps = Json::array();
    for (const auto& st : trace.steps) {
        Json s{{"index", st.index},
               {"blowup", st.blowup},
               {"kind", step_kind_name(st.kind)},
               {"stage", st.stage}};
        if (st.kind == StepKind::ValuationStep) {
            s["chart"] = st.chart.id;
            s["values_before"] = Json::array({rat_to_string(st.values_before[0]),
                                              rat_to_string(st.values_before[1])});
            s["values_after"] = Json::array({rat_to_string(st.values_after[0]),
                                             rat_to_string(st.values_after[1])});
            steps.push_back(std::move(s));
            continue;
        }
        s["before_id"] = st.before_id;
        s["before"] = form_to_json(st.before);
        if (st.kind == StepKind::Substitute) {
            s["center"] = center_to_json(st.center);
            s["chart"] = chart_to_json(st.chart);
            s["effective_monomial"] = mat_to_json(st.effective_monomial);
        }
        if (st.kind == StepKind::PassToTarget) s["pivot"] = kParamNames[st.pivot];
        if (st.kind == StepKind::Recenter) {
            s["recentered"] = kParamNames[st.recentered_param];
            s["constant"] = constant_to_json(st.recenter_constant);
        }
        s["branch"] = branch_to_json(st.branch);
        s["result"] = form_to_json(st.result);
        s["result_id"] = st.result_id;
        switch (st.disposition.kind) {
            case DispositionKind::Toroidal: s["disposition"] = "toroidal"; break;
            case DispositionKind::Unresolved: s["disposition"] = "unresolved"; break;
            case DispositionKind::Undefined: s["disposition"] = "undefined"; break;
        }
        s["detail"] = st.disposition.detail;
        s["label"] = st.label;
        Json invs = Json::array();
        for (const auto& [on, rec] : st.invariants)
            invs.push_back(Json{{"on", on}, {"kind", invariant_name(rec.kind)}, {"value", rec.value}});
        s["invariants"] = invs;
        steps.push_back(std::move(s));
    }
    return Json{{"algorithm", trace.algorithm}, {"outcome", outcome_name(trace.outcome)},
                {"budget", trace.budget},       {"blowups", trace.blowups},
                {"note", trace.note},           {"steps", steps}};
}

Trace trace_from_json(const Json& j) {
    Trace t;
    t.algorithm = j.value("algorithm", "");
    std::string oc = j.value("outcome", "all_toroidal");
    t.outcome = oc == "exhausted" ? Outcome::Exhausted
                                  : (oc == "all_prepared" ? Outcome::AllPrepared
                                                          : Outcome::AllToroidal);
    t.budget = j.value("budget", (long long)0);
    t.blowups = j.value("blowups", (long long)0);
    t.note = j.value("note", "");
    for (const auto& s : j.value("steps", Json::array())) {
        TraceStep st;
        st.index = s.value("index", 0);
        st.blowup = s.value("blowup", 0);
        st.kind = step_kind_from(s.value("kind", "substitute"));
        st.stage = s.value("stage", "");
        if (st.kind == StepKind::ValuationStep) {
            st.chart.id = s.value("chart", "u");
            if (s.contains("values_before")) {
                st.values_before[0] = rat_from_string(s["values_before"][0].get<std::string>());
                st.values_before[1] = rat_from_string(s["values_before"][1].get<std::string>());
            }
            if (s.contains("values_after")) {
                st.values_after[0] = rat_from_string(s["values_after"][0].get<std::string>());
                st.values_after[1] = rat_from_string(s["values_after"][1].get<std::string>());
            }
            t.steps.push_back(std::move(st));
            continue;
        }
        st.before_id = s.value("before_id", -1);
        if (s.contains("before")) st.before = form_from_json(s["before"], "trace step before");
        if (s.contains("center")) st.center = center_from_json(s["center"]);
        if (s.contains("chart") && s["chart"].is_object()) st.chart = chart_from_json(s["chart"]);
        if (s.contains("effective_monomial"))
            st.effective_monomial = mat_from_json(s["effective_monomial"], "trace step");
        if (s.contains("pivot")) st.pivot = param_index(s["pivot"].get<std::string>(), "trace step");
        if (s.contains("recentered"))
            st.recentered_param = param_index(s["recentered"].get<std::string>(), "trace step");
        if (s.contains("constant")) st.recenter_constant = constant_from_json(s["constant"], "trace");
        if (s.contains("branch")) st.branch = branch_from_json(s["branch"]);
        if (s.contains("result")) st.result = form_from_json(s["result"], "trace step result");
        st.result_id = s.value("result_id", -1);
        t.steps.push_back(std::move(st));
    }
    return t;
}

Json verify_report_to_json(const VerifyReport& report) {
    Json ms = Json::array();
    for (const auto& m : report.mismatches)
        ms.push_back(Json{{"step", m.step_index},
                          {"row", kParamNames[m.row]},
                          {"expected", m.expected},
                          {"actual", m.actual},
                          {"witness", m.witness}});
    return Json{{"ok", report.ok},
                {"seed", report.seed},
                {"samples_per_step", report.samples_per_step},
                {"steps_checked", report.steps_checked},
                {"mismatches", ms}};
}

Json classification_to_json(const Classification& c) {
    Json j;
    j["prepared"] = c.prepared;
    if (c.prepared_case) j["case"] = prepared_case_name(*c.prepared_case);
    if (c.pair)
        j["pair"] = Json{{"kind", pair_case_name(c.pair->kind)},
                         {"params", Json::array({kParamNames[c.pair_params[0]],
                                                 kParamNames[c.pair_params[1]]})}};
    if (c.morphism)
        j["morphism"] = Json{{"case", c.morphism->case_index},
                             {"source", c.morphism->source_arity},
                             {"target", c.morphism->target_arity}};
    if (!c.reason.empty()) j["reason"] = c.reason;
    return j;
}

std::string render_case_table(char lemma) {
    auto rows = golden_case_table(lemma);
    std::sort(rows.begin(), rows.end(), [](const GoldenRow& a, const GoldenRow& b) {
        return std::tie(a.pattern, a.chart, a.branch) < std::tie(b.pattern, b.chart, b.branch);
    });
    std::ostringstream os;
    os << "## Case table " << lemma << "\n\n";
    os << "| pattern | chart | branch | outcome |\n";
    os << "|---|---|---|---|\n";
    for (const auto& r : rows)
        os << "| " << r.pattern << " | " << r.chart << " | " << r.branch << " | " << r.label
           << " |\n";
    return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
}

}  // namespace toroidal
