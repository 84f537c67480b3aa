#include "toroidal/engines.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace toroidal {

const char* invariant_name(InvariantKind k) {
    switch (k) {
        case InvariantKind::ALambda: return "a_lambda";
        case InvariantKind::OmegaE: return "omega_e";
        case InvariantKind::PairProduct: return "pair_product";
    }
    return "?";
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::AllToroidal: return "all_toroidal";
        case Outcome::AllPrepared: return "all_prepared";
        case Outcome::Exhausted: return "exhausted";
    }
    return "?";
}

namespace {

constexpr int kU = 0, kV = 1, kW = 2;

LocalForm fold_zero_translates(const LocalForm& form) {
    LocalForm g = form;
    for (int i = 0; i < 3; ++i) {
        RowFactor nf;
        nf.mixed = form.factors[i].mixed;
        nf.units = form.factors[i].units;
        for (const auto& t : form.factors[i].translates) {
            if (t.constant.status == ConstStatus::Zero) {
                if (t.power < 0) throw EngineError("non-unit translate inverted");
                g.exponents[i][t.coord] += t.power;
            } else {
                nf.translates.push_back(t);
            }
        }
        g.factors[i] = std::move(nf);
    }
    return g;
}

bool unit_row(const LocalForm& form, int row) {
    return is_zero(form.exponents[row]) && form.factors[row].is_unit();
}

std::string form_brief(const LocalForm& f) {
    std::ostringstream os;
    for (int i = 0; i < 3; ++i) {
        os << kParamNames[i] << "=(" << f.exponents[i][0] << "," << f.exponents[i][1] << ","
           << f.exponents[i][2] << ")";
        if (i < 2) os << " ";
    }
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Target-chart passage
// ---------------------------------------------------------------------------

std::optional<TargetPassage> pass_to_target(const LocalForm& input,
                                            const std::vector<int>& ideal_params) {
    LocalForm form = fold_zero_translates(input);
    int pivot = -1;
    for (int p : ideal_params) {
        bool divides_all = true;
        for (int r : ideal_params)
            if (!leq(form.exponents[p], form.exponents[r])) {
                divides_all = false;
                break;
            }
        if (divides_all && form.factors[p].is_unit()) {
            pivot = p;
            break;
        }
    }
    if (pivot < 0) return std::nullopt;

    LocalForm g = form;
    for (int r : ideal_params) {
        if (r == pivot) continue;
        auto d = divide_rows(g, r, pivot);
        if (!d) throw EngineError("pivot fails to divide after selection");
        g = *d;
    }

    std::array<bool, 3> ndiv{};
    ndiv[pivot] = true;  // the pivot cuts the exceptional divisor downstairs
    for (int s = 0; s < 3; ++s) {
        if (s == pivot || !form.divisor_down[s]) continue;
        if (!unit_row(g, s)) ndiv[s] = true;  // the strict transform still passes through
    }
    g.divisor_down = ndiv;
    g.downstairs = g.count_down();

    TargetPassage out{g, g, pivot, {}};
    for (int s = 0; s < 3; ++s) {
        if (s == pivot || !unit_row(out.form, s)) continue;
        // the parameter must be recentred to vanish at the image point
        const RowFactor& f = out.form.factors[s];
        LocalForm& nf = out.form;
        if (f.units.empty() && f.translates.size() == 1 && f.translates[0].power == 1) {
            // (c + t) - c is the bare coordinate
            TranslatePart t = f.translates[0];
            nf.exponents[s] = Vec3{0, 0, 0};
            nf.exponents[s][t.coord] = 1;
            nf.factors[s] = RowFactor{};
            out.recentered.emplace_back(s, t.constant);
        } else {
            // general unit: subtract its constant term
            if (f.translates.empty() && f.units.empty())
                throw EngineError(std::string("parameter ") + kParamNames[s] +
                                  " became the constant 1");
            nf.factors[s].centered = true;
            out.recentered.emplace_back(
                s, ConstantClass{ConstStatus::Nonzero, "constant-term"});
        }
    }

    auto violations = validate(out.form);
    if (!violations.empty())
        throw EngineError("target passage produced an invalid form: " + violations.front());
    return out;
}

// ---------------------------------------------------------------------------
// Shapes, loci and invariants
// ---------------------------------------------------------------------------

namespace {

struct Shape {
    int X = -1, Y = -1;  // divisor coordinates in coordinate order (Y = -1 at 1-points)
    int Z = -1;          // transversal coordinate carried linearly by w
};

// Recognizes the running shapes of both pipelines: exponent rows over the
// divisor coordinates with w = (divisor monomial) * z * unit.
std::optional<Shape> running_shape(const LocalForm& form) {
    Shape s;
    std::vector<int> div, free;
    for (int j = 0; j < 3; ++j)
        (form.divisor_up[j] ? div : free).push_back(j);
    if (div.empty() || div.size() > 2) return std::nullopt;
    s.X = div[0];
    s.Y = div.size() == 2 ? div[1] : -1;

    for (int j : free)
        if (form.exponents[kW][j] > 0) {
            if (s.Z >= 0) return std::nullopt;
            if (form.exponents[kW][j] != 1) return std::nullopt;
            s.Z = j;
        }
    if (s.Z < 0) return std::nullopt;
    // u stays a unit times a divisor monomial
    for (int j : free)
        if (form.exponents[kU][j] != 0) return std::nullopt;
    return s;
}

struct LocusCurve {
    int coord;      // divisor coordinate: the curve is V(coord, Z)
    Exp invariant;  // descent invariant at the generic point of the curve
};

std::vector<LocusCurve> locus_curves(const LocalForm& form, const Shape& s,
                                     const std::vector<int>& ideal_params) {
    std::vector<LocusCurve> out;
    for (int c : {s.X, s.Y}) {
        if (c < 0) continue;
        Exp least = -1;
        for (int r : ideal_params) {
            if (r == kW) continue;
            Exp e = form.exponents[r][c];
            least = least < 0 ? e : std::min(least, e);
        }
        Exp wc = form.exponents[kW][c];
        if (wc < least) out.push_back({c, least - wc});
    }
    return out;
}

bool passes(const LocalForm& form, const std::vector<int>& ideal_params) {
    for (int p : ideal_params) {
        bool ok = true;
        for (int r : ideal_params)
            if (!leq(form.exponents[p], form.exponents[r])) {
                ok = false;
                break;
            }
        if (ok && form.factors[p].is_unit()) return true;
    }
    return false;
}

std::string unresolved_pattern_impl(const LocalForm& form, const Shape& s) {
    std::ostringstream os;
    if (form.upstairs == 1) {
        bool bare_v = false;
        Vec3 want{0, 0, 0};
        for (int j = 0; j < 3; ++j)
            if (!form.divisor_up[j] && j != s.Z) {
                want[j] = 1;
                bare_v = form.exponents[kV] == want && form.factors[kV].trivial();
            }
        os << (bare_v ? "coordinate-v-1pt" : "aligned-1pt");
        os << "(a=" << form.exponents[kU][s.X] << ",b=" << form.exponents[kV][s.X]
           << ",d=" << form.exponents[kW][s.X] << ")";
    } else {
        os << "monomial-2pt(u=(" << form.exponents[kU][s.X] << "," << form.exponents[kU][s.Y]
           << "),v=(" << form.exponents[kV][s.X] << "," << form.exponents[kV][s.Y] << "),w=("
           << form.exponents[kW][s.X] << "," << form.exponents[kW][s.Y] << "))";
    }
    return os.str();
}

}  // namespace

InvariantRecord compute_invariant(const LocalForm& input, InvariantKind kind,
                                  std::optional<CurveChoice> curve) {
    LocalForm form = fold_zero_translates(input);
    auto shape = running_shape(form);
    if (!shape) throw EngineError("form does not match the pattern the invariant is defined on");
    const Shape& s = *shape;

    int c = s.X;
    if (curve) c = curve->divisor_coord;
    if (c != s.X && c != s.Y) throw EngineError("curve coordinate is not a divisor coordinate");

    switch (kind) {
        case InvariantKind::ALambda: {
            Exp m = std::min(form.exponents[kU][c], form.exponents[kV][c]);
            return {kind, m - form.exponents[kW][c]};
        }
        case InvariantKind::OmegaE:
            return {kind, form.exponents[kU][c] - form.exponents[kW][c]};
        case InvariantKind::PairProduct: {
            if (form.upstairs != 2) throw EngineError("pair product needs a 2-point form");
            Exp p = (form.exponents[kU][s.X] - form.exponents[kV][s.X]) *
                    (form.exponents[kU][s.Y] - form.exponents[kV][s.Y]);
            return {kind, p};
        }
    }
    throw EngineError("unknown invariant");
}

std::string describe_unresolved(const LocalForm& form) {
    LocalForm f = fold_zero_translates(form);
    auto s = running_shape(f);
    if (!s) throw EngineError("form outside the admissible patterns: " + form_brief(f));
    return unresolved_pattern_impl(f, *s);
}

// ---------------------------------------------------------------------------
// Blow-up application
// ---------------------------------------------------------------------------

namespace {

struct Work {
    int id;
    LocalForm form;
    std::optional<int> tag;
};

struct Ctx {
    Trace trace;
    std::vector<int> ideal_params;
    char lemma = 'A';
    long long budget = 0;
    int next_id = 0;
    int next_step = 0;
    int blowups = 0;

    TraceStep& emit() {
        trace.steps.emplace_back();
        trace.steps.back().index = next_step++;
        trace.steps.back().blowup = blowups;
        return trace.steps.back();
    }
};

std::string arity_label(int p, int q) {
    std::ostringstream os;
    os << p << "-point maps to a " << q << "-point";
    return os.str();
}

// Applies one chart of a blow-up to a work item: substitution, then per
// branch either passage to the target chart (terminal, classified toroidal)
// or a continuing pattern pushed back to the pool.
std::vector<Work> apply_chart(Ctx& ctx, const Work& work, const Center& center,
                              const ChartSubstitution& chart, const std::string& stage,
                              const std::vector<std::pair<std::string, InvariantRecord>>& invs) {
    std::vector<Work> children;
    BranchedForms branched = substitute(work.form, chart);
    for (auto& br : branched.branches) {
        TraceStep& sub = ctx.emit();
        sub.kind = StepKind::Substitute;
        sub.stage = stage;
        sub.before_id = work.id;
        sub.before = work.form;
        sub.center = center;
        sub.chart = chart;
        sub.branch = br.condition;
        sub.result = br.result;
        sub.effective_monomial = br.effective_monomial;
        sub.invariants = invs;
        const size_t sub_index = ctx.trace.steps.size() - 1;

        auto passage = pass_to_target(br.result, ctx.ideal_params);
        if (passage) {
            TraceStep& pt = ctx.emit();
            pt.kind = StepKind::PassToTarget;
            pt.stage = stage;
            pt.before_id = work.id;
            pt.before = br.result;
            pt.branch = br.condition;
            pt.pivot = passage->pivot;
            pt.result = passage->divided;

            LocalForm current = passage->divided;
            for (const auto& [param, c] : passage->recentered) {
                TraceStep& rc = ctx.emit();
                rc.kind = StepKind::Recenter;
                rc.stage = stage;
                rc.before_id = work.id;
                rc.before = current;
                rc.branch = br.condition;
                rc.recentered_param = param;
                rc.recenter_constant = c;
                current.exponents[param] = passage->form.exponents[param];
                current.factors[param] = passage->form.factors[param];
                rc.result = current;
            }

            auto mc = classify_toroidal_morphism(passage->form);
            if (!mc)
                throw EngineError("branch passed to the target but is not a catalog shape: " +
                                  form_brief(passage->form));
            Disposition d;
            d.kind = DispositionKind::Toroidal;
            d.detail = "case " + std::to_string(mc->case_index);
            std::string label = arity_label(mc->source_arity, mc->target_arity);
            ctx.trace.steps[sub_index].disposition = d;
            ctx.trace.steps[sub_index].label = label;
            ctx.trace.steps[sub_index].result_id = -1;
            for (size_t i = sub_index + 1; i < ctx.trace.steps.size(); ++i) {
                ctx.trace.steps[i].disposition = d;
                ctx.trace.steps[i].label = label;
            }
            continue;
        }

        auto shape = running_shape(fold_zero_translates(br.result));
        if (!shape)
            throw EngineError("unresolved branch leaves the admissible patterns: " +
                              form_brief(br.result));
        Work child{ctx.next_id++, br.result, work.tag};
        Disposition d;
        d.kind = DispositionKind::Unresolved;
        d.detail = describe_unresolved(br.result);
        ctx.trace.steps[sub_index].disposition = d;
        ctx.trace.steps[sub_index].result_id = child.id;
        children.push_back(std::move(child));
    }
    return children;
}

std::vector<Work> apply_blowup(Ctx& ctx, const Work& work, const Center& center,
                               const std::string& stage,
                               const std::vector<std::pair<std::string, InvariantRecord>>& invs) {
    if (ctx.budget <= 0) return {};
    --ctx.budget;
    ++ctx.blowups;
    ctx.trace.blowups = ctx.blowups;
    std::string suffix = "_" + std::to_string(ctx.blowups);
    std::vector<Work> children;
    for (const auto& chart : enumerate_charts(center, suffix)) {
        auto part = apply_chart(ctx, work, center, chart, stage, invs);
        for (auto& c : part) children.push_back(std::move(c));
    }
    return children;
}

bool exhausted(Ctx& ctx, const std::deque<Work>& pool) {
    if (ctx.budget > 0 || pool.empty()) return false;
    ctx.trace.outcome = Outcome::Exhausted;
    std::ostringstream os;
    os << "step budget exhausted with " << pool.size() << " unresolved entries; first: "
       << form_brief(pool.front().form);
    ctx.trace.note = os.str();
    return true;
}

Exp initial_max_invariant(const std::vector<Work>& entries, char lemma,
                          const std::vector<int>& ideal) {
    Exp m = 1;
    for (const auto& w : entries) {
        LocalForm f = fold_zero_translates(w.form);
        auto s = running_shape(f);
        if (!s) continue;
        for (const auto& lc : locus_curves(f, *s, ideal)) m = std::max(m, lc.invariant);
        if (f.upstairs == 2) {
            if (lemma == 'A') {
                Exp p = (f.exponents[kU][s->X] - f.exponents[kV][s->X]) *
                        (f.exponents[kU][s->Y] - f.exponents[kV][s->Y]);
                m = std::max(m, std::abs(p));
            }
            // isolated axis points descend through min row entries
            for (int r : ideal)
                m = std::max({m, f.exponents[r][s->X], f.exponents[r][s->Y]});
        }
    }
    return m;
}

void finish(Ctx& ctx) {
    if (ctx.trace.outcome != Outcome::Exhausted) ctx.trace.outcome = Outcome::AllToroidal;
}

}  // namespace

// ---------------------------------------------------------------------------
// The 2-point pipeline
// ---------------------------------------------------------------------------

namespace {

// ordering status of the three exponent pairs at a 2-point entry
struct PairState {
    int first = -1, second = -1;  // rows of the first incomparable pair, -1 if ordered
    Exp product = 0;
};

PairState pair_state(const LocalForm& f, const Shape& s) {
    auto cmp = [&](const Vec3& a, const Vec3& b) {
        Exp ax = a[s.X], ay = a[s.Y], bx = b[s.X], by = b[s.Y];
        bool le = ax <= bx && ay <= by, ge = ax >= bx && ay >= by;
        return le || ge;
    };
    static const int pairs[3][2] = {{kU, kV}, {kU, kW}, {kV, kW}};
    for (const auto& pr : pairs) {
        if (!cmp(f.exponents[pr[0]], f.exponents[pr[1]])) {
            PairState st;
            st.first = pr[0];
            st.second = pr[1];
            st.product = (f.exponents[pr[0]][s.X] - f.exponents[pr[1]][s.X]) *
                         (f.exponents[pr[0]][s.Y] - f.exponents[pr[1]][s.Y]);
            return st;
        }
    }
    return {};
}

void ingest_lemma_a(const Fiber& fiber, Ctx& ctx, std::deque<Work>& pool) {
    if (fiber.entries.empty()) throw EngineError("empty fiber");
    for (const auto& e : fiber.entries) {
        LocalForm f = fold_zero_translates(e.form);
        auto violations = validate(f);
        if (!violations.empty())
            throw EngineError("fiber entry " + std::to_string(e.id) + ": " + violations.front());
        if (f.downstairs != 2 || !f.divisor_down[kU] || !f.divisor_down[kV])
            throw EngineError("fiber entry is not over a 2-point with divisor parameters u, v");
        auto s = running_shape(f);
        if (!s) throw EngineError("fiber entry outside the admissible patterns: " + form_brief(f));
        if (f.upstairs == 2) {
            Exp det = det2(f.exponents[kU][s->X], f.exponents[kU][s->Y], f.exponents[kV][s->X],
                           f.exponents[kV][s->Y]);
            if (det == 0) throw EngineError("2-point entry with dependent monomials");
        } else {
            if (!classify_toroidal_pair(f, kU, kV) && !classify_toroidal_pair(f, kV, kU))
                throw EngineError("1-point entry whose parameter pair is not toroidal");
        }
        pool.push_back({e.id, e.form, e.locus_tag});
        ctx.next_id = std::max(ctx.next_id, e.id + 1);
    }
}

}  // namespace

Trace run_lemma_a(const Fiber& fiber, const EngineOptions& options) {
    Ctx ctx;
    ctx.lemma = 'A';
    ctx.trace.algorithm = "lemma_a";
    ctx.ideal_params = {kU, kV, kW};
    std::deque<Work> pool;
    ingest_lemma_a(fiber, ctx, pool);

    {
        std::vector<Work> init(pool.begin(), pool.end());
        Exp m = initial_max_invariant(init, 'A', ctx.ideal_params);
        ctx.budget = options.budget > 0 ? options.budget : 10 * (m + 1);
        ctx.trace.budget = ctx.budget;
    }

    auto take = [&pool](size_t i) {
        Work w = std::move(pool[i]);
        pool.erase(pool.begin() + static_cast<long>(i));
        return w;
    };

    // entries whose pulled-back ideal is already invertible resolve at once
    for (size_t i = 0; i < pool.size();) {
        LocalForm f = fold_zero_translates(pool[i].form);
        if (passes(f, ctx.ideal_params)) {
            Work w = take(i);
            auto part = apply_chart(ctx, w, Center{CenterKind::Point, {0, 0}}, identity_chart(),
                                    "initial", {});
            for (auto& c : part) pool.push_back(std::move(c));
        } else {
            ++i;
        }
    }

    // stage 1: isolated points of the non-invertible locus
    for (;;) {
        if (exhausted(ctx, pool)) return ctx.trace;
        size_t found = pool.size();
        for (size_t i = 0; i < pool.size(); ++i) {
            LocalForm f = fold_zero_translates(pool[i].form);
            auto s = running_shape(f);
            if (f.upstairs == 2 && locus_curves(f, *s, ctx.ideal_params).empty()) {
                found = i;
                break;
            }
        }
        if (found == pool.size()) break;
        Work w = take(found);
        auto children = apply_blowup(ctx, w, Center{CenterKind::Point, {0, 0}}, "points", {});
        for (auto& c : children) pool.push_back(std::move(c));
    }

    // stage 2: curves the exceptional multiplicity of w misses entirely
    for (;;) {
        if (exhausted(ctx, pool)) return ctx.trace;
        size_t found = pool.size();
        int coord = -1;
        int zc = -1;
        for (size_t i = 0; i < pool.size() && found == pool.size(); ++i) {
            LocalForm f = fold_zero_translates(pool[i].form);
            auto s = running_shape(f);
            if (f.upstairs != 2) continue;
            for (const auto& lc : locus_curves(f, *s, ctx.ideal_params))
                if (f.exponents[kW][lc.coord] == 0) {
                    found = i;
                    coord = lc.coord;
                    zc = s->Z;
                    break;
                }
        }
        if (found == pool.size()) break;
        Work w = take(found);
        auto children =
            apply_blowup(ctx, w, Center{CenterKind::Curve, {coord, zc}}, "curves", {});
        for (auto& c : children) pool.push_back(std::move(c));
    }

    // stage 3: 2-curve blow-ups until the exponent pairs are comparable
    for (;;) {
        if (exhausted(ctx, pool)) return ctx.trace;
        size_t found = pool.size();
        PairState st;
        Shape sh;
        for (size_t i = 0; i < pool.size(); ++i) {
            LocalForm f = fold_zero_translates(pool[i].form);
            auto s = running_shape(f);
            if (f.upstairs != 2) continue;
            PairState cand = pair_state(f, *s);
            if (cand.first >= 0) {
                found = i;
                st = cand;
                sh = *s;
                break;
            }
        }
        if (found == pool.size()) break;
        Work w = take(found);
        std::vector<std::pair<std::string, InvariantRecord>> invs;
        invs.emplace_back(std::string(kParamNames[st.first]) + "," + kParamNames[st.second],
                          InvariantRecord{InvariantKind::PairProduct, st.product});
        auto children =
            apply_blowup(ctx, w, Center{CenterKind::TwoCurve, {sh.X, sh.Y}}, "ordering", invs);
        for (auto& c : children) {
            LocalForm f = fold_zero_translates(c.form);
            auto s = running_shape(f);
            if (f.upstairs == 2 && st.product < 0) {
                Exp np = (f.exponents[st.first][s->X] - f.exponents[st.second][s->X]) *
                         (f.exponents[st.first][s->Y] - f.exponents[st.second][s->Y]);
                if (np <= st.product)
                    throw EngineError("pair product failed to increase under the 2-curve blow-up");
            }
            pool.push_back(std::move(c));
        }
    }

    // stage 4: descent on the curve with maximal invariant (ties: lowest id,
    // then coordinate order)
    for (;;) {
        if (exhausted(ctx, pool)) return ctx.trace;
        size_t best = pool.size();
        int best_coord = -1, best_z = -1;
        Exp best_inv = 0;
        for (size_t i = 0; i < pool.size(); ++i) {
            LocalForm f = fold_zero_translates(pool[i].form);
            auto s = running_shape(f);
            auto curves = locus_curves(f, *s, ctx.ideal_params);
            if (curves.empty())
                throw EngineError("unresolved entry with an empty locus: " + form_brief(f));
            for (const auto& lc : curves) {
                bool better = lc.invariant > best_inv;
                if (lc.invariant == best_inv && best < pool.size())
                    better = std::tie(pool[i].id, lc.coord) <
                             std::tie(pool[best].id, best_coord);
                if (better) {
                    best = i;
                    best_coord = lc.coord;
                    best_z = s->Z;
                    best_inv = lc.invariant;
                }
            }
        }
        if (best == pool.size()) break;
        Work w = take(best);
        std::vector<std::pair<std::string, InvariantRecord>> invs;
        invs.emplace_back(std::string(kCoordNames[best_coord]),
                          InvariantRecord{InvariantKind::ALambda, best_inv});
        // members of the same curve family transform through the same charts
        std::vector<Work> members{std::move(w)};
        if (members[0].tag) {
            for (size_t i = 0; i < pool.size();) {
                LocalForm f = fold_zero_translates(pool[i].form);
                auto s = running_shape(f);
                bool match = pool[i].tag == members[0].tag;
                if (match) {
                    bool eligible = false;
                    for (const auto& lc : locus_curves(f, *s, ctx.ideal_params))
                        if (lc.coord == best_coord) eligible = true;
                    match = eligible && s->Z == best_z;
                }
                if (match) {
                    members.push_back(take(i));
                } else {
                    ++i;
                }
            }
        }
        bool first = true;
        for (const auto& m : members) {
            std::vector<Work> children;
            if (first) {
                children = apply_blowup(ctx, m, Center{CenterKind::Curve, {best_coord, best_z}},
                                        "descent", invs);
                first = false;
            } else {
                // same blow-up: transform without consuming extra budget
                ++ctx.budget;
                children = apply_blowup(ctx, m, Center{CenterKind::Curve, {best_coord, best_z}},
                                        "descent", invs);
            }
            for (auto& c : children) {
                LocalForm f = fold_zero_translates(c.form);
                auto s = running_shape(f);
                for (const auto& lc : locus_curves(f, *s, ctx.ideal_params))
                    if (lc.coord == best_coord && lc.invariant >= best_inv)
                        throw EngineError("descent invariant failed to decrease");
                pool.push_back(std::move(c));
            }
        }
    }

    finish(ctx);
    return ctx.trace;
}

// ---------------------------------------------------------------------------
// The curve pipeline
// ---------------------------------------------------------------------------

Trace run_lemma_b(const Fiber& fiber, const EngineOptions& options) {
    Ctx ctx;
    ctx.lemma = 'B';
    ctx.trace.algorithm = "lemma_b";
    ctx.ideal_params = {kU, kW};
    std::deque<Work> pool;

    if (fiber.entries.empty()) throw EngineError("empty fiber");
    for (const auto& e : fiber.entries) {
        LocalForm f = fold_zero_translates(e.form);
        auto violations = validate(f);
        if (!violations.empty())
            throw EngineError("fiber entry " + std::to_string(e.id) + ": " + violations.front());
        if (!f.divisor_down[kU] || f.divisor_down[kW])
            throw EngineError("curve pipeline needs u on the divisor and w off it");
        auto s = running_shape(f);
        if (!s) throw EngineError("fiber entry outside the admissible patterns: " + form_brief(f));
        if (f.upstairs == 2) {
            Exp det = det2(f.exponents[kU][s->X], f.exponents[kU][s->Y], f.exponents[kV][s->X],
                           f.exponents[kV][s->Y]);
            if (f.divisor_down[kV] && det == 0)
                throw EngineError("2-point entry with dependent monomials");
        }
        pool.push_back({e.id, e.form, e.locus_tag});
        ctx.next_id = std::max(ctx.next_id, e.id + 1);
    }

    {
        std::vector<Work> init(pool.begin(), pool.end());
        Exp m = initial_max_invariant(init, 'B', ctx.ideal_params);
        ctx.budget = options.budget > 0 ? options.budget : 10 * (m + 1);
        ctx.trace.budget = ctx.budget;
    }

    auto take = [&pool](size_t i) {
        Work w = std::move(pool[i]);
        pool.erase(pool.begin() + static_cast<long>(i));
        return w;
    };

    for (size_t i = 0; i < pool.size();) {
        LocalForm f = fold_zero_translates(pool[i].form);
        if (passes(f, ctx.ideal_params)) {
            Work w = take(i);
            auto part = apply_chart(ctx, w, Center{CenterKind::Curve, {0, 2}}, identity_chart(),
                                    "initial", {});
            for (auto& c : part) pool.push_back(std::move(c));
        } else {
            ++i;
        }
    }

    for (;;) {
        if (exhausted(ctx, pool)) return ctx.trace;
        size_t best = pool.size();
        int best_coord = -1, best_z = -1;
        Exp best_inv = 0;
        for (size_t i = 0; i < pool.size(); ++i) {
            LocalForm f = fold_zero_translates(pool[i].form);
            auto s = running_shape(f);
            auto curves = locus_curves(f, *s, ctx.ideal_params);
            if (curves.empty())
                throw EngineError("unresolved entry with an empty locus: " + form_brief(f));
            for (const auto& lc : curves) {
                bool better = lc.invariant > best_inv;
                if (lc.invariant == best_inv && best < pool.size())
                    better = std::tie(pool[i].id, lc.coord) <
                             std::tie(pool[best].id, best_coord);
                if (better) {
                    best = i;
                    best_coord = lc.coord;
                    best_z = s->Z;
                    best_inv = lc.invariant;
                }
            }
        }
        if (best == pool.size()) break;
        Work w = take(best);
        std::vector<std::pair<std::string, InvariantRecord>> invs;
        invs.emplace_back(std::string(kCoordNames[best_coord]),
                          InvariantRecord{InvariantKind::OmegaE, best_inv});
        auto children =
            apply_blowup(ctx, w, Center{CenterKind::Curve, {best_coord, best_z}}, "descent", invs);
        for (auto& c : children) {
            LocalForm f = fold_zero_translates(c.form);
            auto s = running_shape(f);
            for (const auto& lc : locus_curves(f, *s, ctx.ideal_params))
                if (lc.coord == best_coord && lc.invariant >= best_inv)
                    throw EngineError("descent invariant failed to decrease");
            pool.push_back(std::move(c));
        }
    }

    finish(ctx);
    return ctx.trace;
}

// ---------------------------------------------------------------------------
// Standalone ordering loop
// ---------------------------------------------------------------------------

Trace order_monomial_pairs(const LocalForm& form, const EngineOptions& options) {
    Ctx ctx;
    ctx.lemma = 'A';
    ctx.trace.algorithm = "ordering";
    ctx.ideal_params = {kU, kV, kW};
    std::deque<Work> pool;
    {
        LocalForm f = fold_zero_translates(form);
        auto violations = validate(f);
        if (!violations.empty()) throw EngineError("invalid form: " + violations.front());
        auto s = running_shape(f);
        if (!s || f.upstairs != 2) throw EngineError("ordering needs a 2-point running shape");
        pool.push_back({0, form, std::nullopt});
        ctx.next_id = 1;
        Exp m = initial_max_invariant({pool.front()}, 'A', ctx.ideal_params);
        ctx.budget = options.budget > 0 ? options.budget : 10 * (m + 1);
        ctx.trace.budget = ctx.budget;
    }

    for (;;) {
        if (ctx.budget <= 0 && !pool.empty()) {
            bool live = false;
            for (const auto& w : pool) {
                LocalForm f = fold_zero_translates(w.form);
                auto s = running_shape(f);
                if (f.upstairs == 2 && pair_state(f, *s).first >= 0) live = true;
            }
            if (live) {
                ctx.trace.outcome = Outcome::Exhausted;
                ctx.trace.note = "step budget exhausted during ordering";
                return ctx.trace;
            }
        }
        size_t found = pool.size();
        PairState st;
        Shape sh;
        for (size_t i = 0; i < pool.size(); ++i) {
            LocalForm f = fold_zero_translates(pool[i].form);
            auto s = running_shape(f);
            if (f.upstairs != 2) continue;
            PairState cand = pair_state(f, *s);
            if (cand.first >= 0) {
                found = i;
                st = cand;
                sh = *s;
                break;
            }
        }
        if (found == pool.size()) break;
        Work w = pool[found];
        pool.erase(pool.begin() + static_cast<long>(found));
        std::vector<std::pair<std::string, InvariantRecord>> invs;
        invs.emplace_back(std::string(kParamNames[st.first]) + "," + kParamNames[st.second],
                          InvariantRecord{InvariantKind::PairProduct, st.product});
        auto children =
            apply_blowup(ctx, w, Center{CenterKind::TwoCurve, {sh.X, sh.Y}}, "ordering", invs);
        for (auto& c : children) {
            LocalForm f = fold_zero_translates(c.form);
            auto s = running_shape(f);
            if (f.upstairs == 2 && st.product < 0) {
                Exp np = (f.exponents[st.first][s->X] - f.exponents[st.second][s->X]) *
                         (f.exponents[st.first][s->Y] - f.exponents[st.second][s->Y]);
                if (np <= st.product)
                    throw EngineError("pair product failed to increase under the 2-curve blow-up");
            }
            pool.push_back(std::move(c));
        }
    }
    finish(ctx);
    return ctx.trace;
}

// ---------------------------------------------------------------------------
// Valuation resolver
// ---------------------------------------------------------------------------

Trace resolve_dependent_valuation(const ValuationState& state, const EngineOptions& options) {
    Trace trace;
    trace.algorithm = "valuation";
    if (state.values[0] <= 0 || state.values[1] <= 0)
        throw EngineError("valuation values must be positive");

    if (state.declared_independent) {
        trace.outcome = Outcome::AllToroidal;
        trace.note = "rationally independent: the center is already a well-placed point, "
                     "no blow-ups needed";
        return trace;
    }

    Rat a = state.values[0], b = state.values[1];
    // exact subtractive bound: with a = p/q and b = r/s over the common
    // denominator qs the step count is at most (ps + rq) / gcd
    long long bound;
    {
        mpz_class num = a.get_num() * b.get_den() + b.get_num() * a.get_den();
        mpz_class g = gcd(a.get_num() * b.get_den(), b.get_num() * a.get_den());
        mpz_class steps = num / g;
        bound = steps.fits_slong_p() ? steps.get_si() : (1LL << 40);
    }
    trace.budget = options.budget > 0 ? options.budget : bound + 1;

    int index = 0;
    while (a != 0 && b != 0) {
        if (trace.blowups >= trace.budget) {
            trace.outcome = Outcome::Exhausted;
            trace.note = "valuation descent exceeded its budget";
            return trace;
        }
        TraceStep step;
        step.index = index++;
        step.blowup = static_cast<int>(trace.blowups + 1);
        step.kind = StepKind::ValuationStep;
        step.stage = "valuation";
        step.values_before = {a, b};
        if (b >= a) {
            // center lies in the chart where u generates: (u, v/u)
            step.chart.id = "u";
            b -= a;
        } else {
            step.chart.id = "v";
            a -= b;
        }
        step.values_after = {a, b};
        step.label = "2-curve blow-up, chart " + step.chart.id;
        trace.steps.push_back(std::move(step));
        ++trace.blowups;
    }
    trace.outcome = Outcome::AllToroidal;
    trace.note = "one value reached zero: the center has left the 2-curve locus";
    return trace;
}

}  // namespace toroidal
