#include "toroidal/oracle.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace toroidal {

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

Rat rat_pow(const Rat& base, Exp power) {
    if (power == 0) return Rat(1);
    Rat b = base;
    Exp p = power;
    if (p < 0) {
        if (b == 0) throw std::domain_error("zero raised to a negative power");
        b = 1 / b;
        p = -p;
    }
    Rat r(1);
    while (p > 0) {
        if (p & 1) r *= b;
        b *= b;
        p >>= 1;
    }
    return r;
}

const Rat& const_value(const SamplePoint& pt, const ConstantClass& c) {
    auto it = pt.constants.find(c.label);
    if (it == pt.constants.end())
        throw std::invalid_argument("sample point missing constant " + c.label);
    return it->second;
}

Rat arg_value(const SeriesArg& a, const SamplePoint& pt) {
    Rat v(1);
    for (int j = 0; j < 3; ++j) v *= rat_pow(pt.coords[j], a.exponents[j]);
    for (const auto& t : a.translates) v *= rat_pow(const_value(pt, t.constant) + pt.coords[t.coord], t.power);
    return v;
}

}  // namespace

Rat evaluate_row(const LocalForm& form, int row, const SamplePoint& point) {
    const RowFactor& f = form.factors[row];
    if (f.mixed) throw std::invalid_argument("mixed-series rows cannot be evaluated");
    Rat v(1);
    for (int j = 0; j < 3; ++j) v *= rat_pow(point.coords[j], form.exponents[row][j]);
    for (const auto& t : f.translates)
        v *= rat_pow(const_value(point, t.constant) + point.coords[t.coord], t.power);
    for (const auto& u : f.units) {
        Rat g(1);
        for (const auto& a : u.args) g += arg_value(a, point);
        v *= rat_pow(g, u.power);
    }
    if (f.centered) {
        // subtract the constant term: the factor product at the origin
        SamplePoint origin = point;
        origin.coords = {Rat(0), Rat(0), Rat(0)};
        Rat c(1);
        for (const auto& t : f.translates)
            c *= rat_pow(const_value(origin, t.constant), t.power);
        for (const auto& u : f.units) {
            Rat g(1);
            for (const auto& a : u.args) g += arg_value(a, origin);
            c *= rat_pow(g, u.power);
        }
        v -= c;
    }
    return v;
}

std::array<Rat, 3> evaluate(const LocalForm& form, const SamplePoint& point) {
    return {evaluate_row(form, 0, point), evaluate_row(form, 1, point),
            evaluate_row(form, 2, point)};
}

SamplePoint draw_sample(Rng& rng, const std::vector<std::string>& constant_labels,
                        const std::map<std::string, ConstStatus>& statuses) {
    SamplePoint pt;
    for (int j = 0; j < 3; ++j) pt.coords[j] = rng.rational();
    for (const auto& label : constant_labels) {
        auto it = statuses.find(label);
        ConstStatus st = it == statuses.end() ? ConstStatus::Nonzero : it->second;
        pt.constants[label] = st == ConstStatus::Zero ? Rat(0) : rng.rational();
    }
    return pt;
}

// ---------------------------------------------------------------------------
// Chain verification
// ---------------------------------------------------------------------------

namespace {

void collect_constants(const RowFactor& f, std::map<std::string, ConstStatus>& statuses) {
    for (const auto& t : f.translates) statuses.emplace(t.constant.label, t.constant.status);
    for (const auto& u : f.units)
        for (const auto& a : u.args)
            for (const auto& t : a.translates) statuses.emplace(t.constant.label, t.constant.status);
}

std::map<std::string, ConstStatus> step_constants(const TraceStep& step) {
    std::map<std::string, ConstStatus> statuses;
    for (int i = 0; i < 3; ++i) {
        collect_constants(step.before.factors[i], statuses);
        collect_constants(step.result.factors[i], statuses);
    }
    for (int j = 0; j < 3; ++j)
        if (step.chart.translates[j])
            statuses.emplace(step.chart.translates[j]->constant.label,
                             step.chart.translates[j]->constant.status);
    for (const auto& a : step.branch) statuses[a.label] = a.status;
    return statuses;
}

std::string witness_string(const SamplePoint& pt) {
    std::ostringstream os;
    os << "x=" << rat_to_string(pt.coords[0]) << " y=" << rat_to_string(pt.coords[1])
       << " z=" << rat_to_string(pt.coords[2]);
    for (const auto& [k, v] : pt.constants) os << " " << k << "=" << rat_to_string(v);
    return os.str();
}

std::vector<int> ideal_for(const std::string& algorithm) {
    if (algorithm == "lemma_b") return {0, 2};
    return {0, 1, 2};
}

// image of the sample under the branch's resolved chart substitution
SamplePoint map_down(const TraceStep& step, const SamplePoint& pt) {
    SamplePoint old = pt;
    for (int j = 0; j < 3; ++j) {
        Rat v(1);
        for (int k = 0; k < 3; ++k) v *= rat_pow(pt.coords[k], step.effective_monomial[j][k]);
        if (step.chart.translates[j]) {
            ConstantClass c = step.chart.translates[j]->constant;
            ConstStatus st = c.status;
            for (const auto& a : step.branch)
                if (a.label == c.label) st = a.status;
            if (st == ConstStatus::Nonzero) {
                auto it = pt.constants.find(c.label);
                if (it == pt.constants.end())
                    throw std::invalid_argument("missing chart constant " + c.label);
                v *= it->second + pt.coords[step.chart.translates[j]->new_coord];
            }
            // Zero-status translates are already folded into the monomial
        }
        old.coords[j] = v;
    }
    return old;
}

}  // namespace

VerifyReport verify_chain(const Trace& trace, long long samples, std::uint64_t seed) {
    VerifyReport report;
    report.seed = seed;
    report.samples_per_step = samples;
    Rng rng(seed);
    const std::vector<int> ideal = ideal_for(trace.algorithm);

    for (const auto& step : trace.steps) {
        if (step.kind == StepKind::ValuationStep) {
            Rat a = step.values_before[0], b = step.values_before[1];
            if (b >= a)
                b -= a;
            else
                a -= b;
            if (a != step.values_after[0] || b != step.values_after[1]) {
                report.ok = false;
                report.mismatches.push_back({step.index, 0, rat_to_string(a),
                                             rat_to_string(step.values_after[0]),
                                             "subtractive step arithmetic"});
            }
            ++report.steps_checked;
            continue;
        }

        auto statuses = step_constants(step);
        std::vector<std::string> labels;
        for (const auto& [k, v] : statuses) labels.push_back(k);

        for (long long s = 0; s < samples; ++s) {
            SamplePoint pt = draw_sample(rng, labels, statuses);
            switch (step.kind) {
                case StepKind::Substitute: {
                    SamplePoint old = map_down(step, pt);
                    for (int row = 0; row < 3; ++row) {
                        Rat expect = evaluate_row(step.before, row, old);
                        Rat got = evaluate_row(step.result, row, pt);
                        if (expect != got) {
                            report.ok = false;
                            report.mismatches.push_back({step.index, row, rat_to_string(expect),
                                                         rat_to_string(got), witness_string(pt)});
                        }
                    }
                    break;
                }
                case StepKind::PassToTarget: {
                    Rat pivot_val = evaluate_row(step.before, step.pivot, pt);
                    for (int row = 0; row < 3; ++row) {
                        bool is_divided = row != step.pivot &&
                                          std::find(ideal.begin(), ideal.end(), row) != ideal.end();
                        Rat expect = evaluate_row(step.before, row, pt);
                        Rat got = evaluate_row(step.result, row, pt);
                        if (is_divided) got *= pivot_val;
                        if (expect != got) {
                            report.ok = false;
                            report.mismatches.push_back({step.index, row, rat_to_string(expect),
                                                         rat_to_string(got), witness_string(pt)});
                        }
                    }
                    break;
                }
                case StepKind::Recenter: {
                    SamplePoint origin = pt;
                    origin.coords = {Rat(0), Rat(0), Rat(0)};
                    for (int row = 0; row < 3; ++row) {
                        Rat expect = evaluate_row(step.before, row, pt);
                        if (row == step.recentered_param)
                            expect -= evaluate_row(step.before, row, origin);
                        Rat got = evaluate_row(step.result, row, pt);
                        if (expect != got) {
                            report.ok = false;
                            report.mismatches.push_back({step.index, row, rat_to_string(expect),
                                                         rat_to_string(got), witness_string(pt)});
                        }
                    }
                    break;
                }
                default:
                    break;
            }
            if (!report.ok && report.mismatches.size() > 32) break;  // enough witnesses
        }
        ++report.steps_checked;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Matrix cross-checks
// ---------------------------------------------------------------------------

MatrixReport cross_check_matrix(const TraceStep& step) {
    MatrixReport r;
    if (step.kind != StepKind::Substitute) return r;
    ++r.steps_checked;
    Mat3 product = mat_mul(step.before.exponents, step.effective_monomial);
    if (product != step.result.exponents) {
        r.ok = false;
        r.failures.push_back("step " + std::to_string(step.index) +
                             ": exponent matrix is not the product E*S");
    }
    bool trivial = true;
    for (int i = 0; i < 3; ++i)
        if (!step.before.factors[i].trivial() || !step.result.factors[i].trivial()) trivial = false;
    if (trivial) {
        Exp lhs = det3(step.result.exponents);
        Exp rhs = det3(step.before.exponents) * det3(step.effective_monomial);
        if (lhs != rhs) {
            r.ok = false;
            r.failures.push_back("step " + std::to_string(step.index) +
                                 ": determinant is not multiplicative");
        }
    }
    return r;
}

MatrixReport cross_check_matrix(const Trace& trace) {
    MatrixReport total;
    for (const auto& step : trace.steps) {
        MatrixReport r = cross_check_matrix(step);
        total.steps_checked += r.steps_checked;
        if (!r.ok) {
            total.ok = false;
            for (auto& f : r.failures) total.failures.push_back(std::move(f));
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Golden case tables
// ---------------------------------------------------------------------------

namespace {

LocalForm base_form(int up, int down) {
    LocalForm f;
    f.upstairs = up;
    f.downstairs = down;
    for (int j = 0; j < up; ++j) f.divisor_up[j] = true;
    for (int i = 0; i < down; ++i) f.divisor_down[i] = true;
    return f;
}

// u = x^a, v = y^b, w = z over a 2-point
LocalForm axis2(Exp a, Exp b) {
    LocalForm f = base_form(2, 2);
    f.exponents = {Vec3{a, 0, 0}, Vec3{0, b, 0}, Vec3{0, 0, 1}};
    return f;
}

// u = x^a y^b, v = x^c y^d, w = x^e y^f z over a 2-point
LocalForm mono2(Exp a, Exp b, Exp c, Exp d, Exp e, Exp f) {
    LocalForm g = base_form(2, 2);
    g.exponents = {Vec3{a, b, 0}, Vec3{c, d, 0}, Vec3{e, f, 1}};
    return g;
}

// u = x^a, v = x^b (alpha0 + y), w = x^d z over a 1-point
LocalForm aligned1(Exp a, Exp b, Exp d) {
    LocalForm f = base_form(1, 2);
    f.exponents = {Vec3{a, 0, 0}, Vec3{b, 0, 0}, Vec3{d, 0, 1}};
    f.factors[1] = make_translate(1, {ConstStatus::Nonzero, "alpha0"});
    return f;
}

// u = x^a, v = y, w = x^d z over a 1-point of a 1-point target
LocalForm coordv1(Exp a, Exp d) {
    LocalForm f = base_form(1, 1);
    f.exponents = {Vec3{a, 0, 0}, Vec3{0, 1, 0}, Vec3{d, 0, 1}};
    return f;
}

std::string arity_label(int p, int q) {
    std::ostringstream os;
    os << p << "-point maps to a " << q << "-point";
    return os.str();
}

struct RowSpec {
    std::string pattern, chart, branch;
    LocalForm instance;
    Center center;
    std::vector<BranchAssignment> assignment;
    ExpectedDisposition expected;
};

GoldenRow finish_row(char lemma, RowSpec spec) {
    GoldenRow row;
    row.lemma = lemma;
    row.pattern = std::move(spec.pattern);
    row.chart = std::move(spec.chart);
    row.branch = std::move(spec.branch);
    row.instance = std::move(spec.instance);
    row.center = spec.center;
    row.assignment = std::move(spec.assignment);
    row.expected = spec.expected;
    if (row.expected.kind == DispositionKind::Toroidal)
        row.label = arity_label(row.expected.source_arity, row.expected.target_arity);
    else
        row.label = "unresolved: " + row.expected.pattern;
    return row;
}

ExpectedDisposition toroidal(int p, int q) {
    ExpectedDisposition e;
    e.kind = DispositionKind::Toroidal;
    e.source_arity = p;
    e.target_arity = q;
    return e;
}

ExpectedDisposition unresolved(std::string pattern) {
    ExpectedDisposition e;
    e.kind = DispositionKind::Unresolved;
    e.pattern = std::move(pattern);
    return e;
}

const Center kPoint{CenterKind::Point, {0, 0}};
const Center kCurveXZ{CenterKind::Curve, {0, 2}};

std::vector<BranchAssignment> nz(std::initializer_list<const char*> labels) {
    std::vector<BranchAssignment> v;
    for (const char* l : labels) v.push_back({l, ConstStatus::Nonzero});
    return v;
}
std::vector<BranchAssignment> zero(std::initializer_list<const char*> labels) {
    std::vector<BranchAssignment> v;
    for (const char* l : labels) v.push_back({l, ConstStatus::Zero});
    return v;
}
std::vector<BranchAssignment> join(std::vector<BranchAssignment> a,
                                   std::vector<BranchAssignment> b) {
    for (auto& x : b) a.push_back(std::move(x));
    return a;
}

}  // namespace

std::vector<GoldenRow> golden_case_table(char lemma) {
    std::vector<GoldenRow> rows;
    auto push = [&rows, lemma](RowSpec spec) { rows.push_back(finish_row(lemma, std::move(spec))); };

    if (lemma == 'A') {
        // point blow-up of an isolated axis point, chart of the x direction
        push({"axis-2pt(a=1,b=2)", "x", "a=1, b>a, alpha!=0", axis2(1, 2), kPoint,
              nz({"alpha"}), toroidal(1, 2)});
        push({"axis-2pt(a=1,b=1)", "x", "a=b=1, alpha!=0", axis2(1, 1), kPoint, nz({"alpha"}),
              toroidal(1, 1)});
        push({"axis-2pt(a=1,b=2)", "x", "a=1, alpha=0", axis2(1, 2), kPoint, zero({"alpha"}),
              toroidal(2, 2)});
        push({"axis-2pt(a=2,b=3)", "x", "a>1, beta!=0, alpha!=0", axis2(2, 3), kPoint,
              nz({"alpha", "beta"}), toroidal(1, 3)});
        push({"axis-2pt(a=2,b=3)", "x", "a>1, beta!=0, alpha=0", axis2(2, 3), kPoint,
              join(zero({"alpha"}), nz({"beta"})), toroidal(2, 3)});
        push({"axis-2pt(a=2,b=3)", "x", "a>1, beta=0, alpha!=0", axis2(2, 3), kPoint,
              join(nz({"alpha"}), zero({"beta"})), unresolved("aligned-1pt(a=2,b=3,d=1)")});
        push({"axis-2pt(a=2,b=3)", "x", "a>1, beta=0, alpha=0", axis2(2, 3), kPoint,
              zero({"alpha", "beta"}),
              unresolved("monomial-2pt(u=(2,0),v=(3,3),w=(1,0))")});
        // chart of the y direction
        push({"axis-2pt(a=1,b=1)", "y", "b=1", axis2(1, 1), kPoint, {}, toroidal(2, 2)});
        push({"axis-2pt(a=1,b=2)", "y", "b>1, alpha!=0", axis2(1, 2), kPoint, nz({"alpha"}),
              toroidal(2, 3)});
        push({"axis-2pt(a=1,b=2)", "y", "b>1, alpha=0", axis2(1, 2), kPoint, zero({"alpha"}),
              unresolved("monomial-2pt(u=(1,1),v=(0,2),w=(0,1))")});
        // chart of the z direction
        push({"axis-2pt(a=2,b=3)", "z", "-", axis2(2, 3), kPoint, {}, toroidal(3, 3)});

        // blow-up of the curve x = z = 0 through a shared-support 2-point
        push({"monomial-2pt(u=(1,1),v=(1,2),w=(0,0))", "x", "alpha!=0", mono2(1, 1, 1, 2, 0, 0),
              kCurveXZ, nz({"alpha"}), toroidal(2, 3)});
        push({"monomial-2pt(u=(1,1),v=(1,2),w=(0,0))", "x", "alpha=0", mono2(1, 1, 1, 2, 0, 0),
              kCurveXZ, zero({"alpha"}), unresolved("monomial-2pt(u=(1,1),v=(1,2),w=(1,0))")});
        push({"monomial-2pt(u=(1,1),v=(1,2),w=(0,0))", "z", "-", mono2(1, 1, 1, 2, 0, 0),
              kCurveXZ, {}, toroidal(3, 3)});

        // descent on the aligned 1-point pattern
        push({"aligned-1pt(a=2,b=2,d=1)", "x", "d+1=a=b", aligned1(2, 2, 1), kCurveXZ, {},
              toroidal(1, 1)});
        push({"aligned-1pt(a=2,b=3,d=1)", "x", "d+1=a<b", aligned1(2, 3, 1), kCurveXZ, {},
              toroidal(1, 2)});
        push({"aligned-1pt(a=3,b=3,d=1)", "x", "d+1<min(a,b), beta!=0", aligned1(3, 3, 1),
              kCurveXZ, nz({"alpha"}), toroidal(1, 3)});
        push({"aligned-1pt(a=3,b=3,d=1)", "x", "d+1<min(a,b), beta=0", aligned1(3, 3, 1),
              kCurveXZ, zero({"alpha"}), unresolved("aligned-1pt(a=3,b=3,d=2)")});
        push({"aligned-1pt(a=2,b=3,d=1)", "z", "-", aligned1(2, 3, 1), kCurveXZ, {},
              toroidal(2, 3)});

        // descent on the ordered 2-point pattern
        push({"monomial-2pt(u=(1,1),v=(3,2),w=(0,1))", "x", "(e+1,f)=(a,b)",
              mono2(1, 1, 3, 2, 0, 1), kCurveXZ, {}, toroidal(2, 2)});
        push({"monomial-2pt(u=(2,1),v=(3,2),w=(0,1))", "x", "(e+1,f)<(a,b), beta!=0",
              mono2(2, 1, 3, 2, 0, 1), kCurveXZ, nz({"alpha"}), toroidal(2, 3)});
        push({"monomial-2pt(u=(2,1),v=(3,2),w=(0,1))", "x", "(e+1,f)<(a,b), beta=0",
              mono2(2, 1, 3, 2, 0, 1), kCurveXZ, zero({"alpha"}),
              unresolved("monomial-2pt(u=(2,1),v=(3,2),w=(1,1))")});
        push({"monomial-2pt(u=(2,1),v=(3,2),w=(0,1))", "z", "-", mono2(2, 1, 3, 2, 0, 1),
              kCurveXZ, {}, toroidal(3, 3)});
    } else {
        // curve pipeline: translate 1-point over a 2-point
        push({"aligned-1pt(a=2,b=3,d=1)", "x", "d+1=a", aligned1(2, 3, 1), kCurveXZ, {},
              toroidal(1, 2)});
        push({"aligned-1pt(a=3,b=2,d=1)", "x", "d+1<a, beta!=0", aligned1(3, 2, 1), kCurveXZ,
              nz({"alpha"}), toroidal(1, 3)});
        push({"aligned-1pt(a=3,b=2,d=1)", "x", "d+1<a, beta=0", aligned1(3, 2, 1), kCurveXZ,
              zero({"alpha"}), unresolved("aligned-1pt(a=3,b=2,d=2)")});
        push({"aligned-1pt(a=2,b=3,d=1)", "z", "-", aligned1(2, 3, 1), kCurveXZ, {},
              toroidal(2, 3)});

        // 2-point over a 2-point
        push({"monomial-2pt(u=(2,1),v=(1,3),w=(1,1))", "x", "(g+1,h)=(a,b)",
              mono2(2, 1, 1, 3, 1, 1), kCurveXZ, {}, toroidal(2, 2)});
        push({"monomial-2pt(u=(3,1),v=(1,2),w=(1,1))", "x", "(g+1,h)<(a,b), beta!=0",
              mono2(3, 1, 1, 2, 1, 1), kCurveXZ, nz({"alpha"}), toroidal(2, 3)});
        push({"monomial-2pt(u=(3,1),v=(1,2),w=(1,1))", "x", "(g+1,h)<(a,b), beta=0",
              mono2(3, 1, 1, 2, 1, 1), kCurveXZ, zero({"alpha"}),
              unresolved("monomial-2pt(u=(3,1),v=(1,2),w=(2,1))")});
        push({"monomial-2pt(u=(3,1),v=(1,2),w=(1,1))", "z", "-", mono2(3, 1, 1, 2, 1, 1),
              kCurveXZ, {}, toroidal(3, 3)});

        // coordinate 1-point over a 1-point
        push({"coordinate-v-1pt(a=2,b=0,d=1)", "x", "d+1=a", coordv1(2, 1), kCurveXZ, {},
              toroidal(1, 1)});
        push({"coordinate-v-1pt(a=3,b=0,d=1)", "x", "d+1<a, beta!=0", coordv1(3, 1), kCurveXZ,
              nz({"alpha"}), toroidal(1, 2)});
        push({"coordinate-v-1pt(a=3,b=0,d=1)", "x", "d+1<a, beta=0", coordv1(3, 1), kCurveXZ,
              zero({"alpha"}), unresolved("coordinate-v-1pt(a=3,b=0,d=2)")});
        push({"coordinate-v-1pt(a=2,b=0,d=1)", "z", "-", coordv1(2, 1), kCurveXZ, {},
              toroidal(2, 2)});
    }
    return rows;
}

namespace {

bool assignment_consistent(const std::vector<BranchAssignment>& condition,
                           const std::vector<BranchAssignment>& row_assignment) {
    for (const auto& want : row_assignment) {
        bool found = false;
        for (const auto& have : condition)
            if (have.label == want.label) {
                found = true;
                if (have.status != want.status) return false;
            }
        if (!found) return false;
    }
    return true;
}

}  // namespace

std::optional<std::string> check_golden_row(const GoldenRow& row, Trace* trace_out) {
    const std::vector<int> ideal = row.lemma == 'A' ? std::vector<int>{0, 1, 2}
                                                    : std::vector<int>{0, 2};
    auto charts = enumerate_charts(row.center, "");
    const ChartSubstitution* chart = nullptr;
    for (const auto& c : charts)
        if (c.id == row.chart) chart = &c;
    if (!chart) return "chart '" + row.chart + "' not in the cover of the center";

    BranchedForms branched;
    try {
        branched = substitute(row.instance, *chart);
    } catch (const std::exception& e) {
        return std::string("substitution failed: ") + e.what();
    }

    Trace local;
    local.algorithm = row.lemma == 'A' ? "lemma_a" : "lemma_b";
    int index = 0;
    int matched = 0;
    for (const auto& br : branched.branches) {
        if (!assignment_consistent(br.condition, row.assignment)) continue;
        ++matched;

        TraceStep sub;
        sub.index = index++;
        sub.kind = StepKind::Substitute;
        sub.stage = "golden";
        sub.before = row.instance;
        sub.center = row.center;
        sub.chart = *chart;
        sub.branch = br.condition;
        sub.result = br.result;
        sub.effective_monomial = br.effective_monomial;
        local.steps.push_back(sub);

        std::optional<TargetPassage> passage;
        try {
            passage = pass_to_target(br.result, ideal);
        } catch (const std::exception& e) {
            return std::string("target passage failed: ") + e.what();
        }

        if (row.expected.kind == DispositionKind::Toroidal) {
            if (!passage)
                return "branch " + branch_condition_string(br.condition) +
                       ": expected a toroidal outcome but the map does not factor";
            TraceStep pt;
            pt.index = index++;
            pt.kind = StepKind::PassToTarget;
            pt.stage = "golden";
            pt.before = br.result;
            pt.branch = br.condition;
            pt.pivot = passage->pivot;
            pt.result = passage->divided;
            local.steps.push_back(pt);
            LocalForm current = passage->divided;
            for (const auto& [param, c] : passage->recentered) {
                TraceStep rc;
                rc.index = index++;
                rc.kind = StepKind::Recenter;
                rc.stage = "golden";
                rc.before = current;
                rc.branch = br.condition;
                rc.recentered_param = param;
                rc.recenter_constant = c;
                current.exponents[param] = passage->form.exponents[param];
                current.factors[param] = passage->form.factors[param];
                rc.result = current;
                local.steps.push_back(rc);
            }
            auto mc = classify_toroidal_morphism(passage->form);
            if (!mc)
                return "branch " + branch_condition_string(br.condition) +
                       ": factored form is not a catalog shape";
            if (mc->source_arity != row.expected.source_arity ||
                mc->target_arity != row.expected.target_arity) {
                std::ostringstream os;
                os << "branch " << branch_condition_string(br.condition) << ": got "
                   << arity_label(mc->source_arity, mc->target_arity) << ", expected "
                   << row.label;
                return os.str();
            }
        } else {
            if (passage)
                return "branch " + branch_condition_string(br.condition) +
                       ": expected an unresolved pattern but the map factors";
            std::string got;
            try {
                got = describe_unresolved(br.result);
            } catch (const std::exception& e) {
                return std::string("unresolved pattern mismatch: ") + e.what();
            }
            if (got != row.expected.pattern)
                return "branch " + branch_condition_string(br.condition) + ": got " + got +
                       ", expected " + row.expected.pattern;
        }
    }
    if (matched == 0) return "no branch matches the row's constant assignment";
    if (trace_out) *trace_out = std::move(local);
    return std::nullopt;
}

}  // namespace toroidal
