#include "toroidal/charts.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace toroidal {

ChartSubstitution identity_chart() {
    ChartSubstitution c;
    c.id = "id";
    return c;
}

std::vector<ChartSubstitution> enumerate_charts(const Center& center,
                                                const std::string& label_suffix) {
    auto alpha = ConstantClass{ConstStatus::Generic, "alpha" + label_suffix};
    auto beta = ConstantClass{ConstStatus::Generic, "beta" + label_suffix};

    if (center.kind == CenterKind::Point) {
        // blow-up of the origin: one chart per exceptional direction
        ChartSubstitution cx;  // x = x', y = x'(y'+a), z = x'(z'+b)
        cx.id = "x";
        cx.monomial = {Vec3{1, 0, 0}, Vec3{1, 0, 0}, Vec3{1, 0, 0}};
        cx.translates[1] = ChartTranslate{1, alpha};
        cx.translates[2] = ChartTranslate{2, beta};

        ChartSubstitution cy;  // x = x'y', y = y', z = y'(z'+a)
        cy.id = "y";
        cy.monomial = {Vec3{1, 1, 0}, Vec3{0, 1, 0}, Vec3{0, 1, 0}};
        cy.translates[2] = ChartTranslate{2, alpha};

        ChartSubstitution cz;  // x = x'z', y = y'z', z = z'
        cz.id = "z";
        cz.monomial = {Vec3{1, 0, 1}, Vec3{0, 1, 1}, Vec3{0, 0, 1}};
        return {cx, cy, cz};
    }

    // curve or 2-curve along c1 = c2 = 0: two charts
    const int c1 = center.coords[0], c2 = center.coords[1];
    if (c1 == c2) throw ChartError("center equations repeat a coordinate");

    ChartSubstitution first;  // c1 = c1', c2 = c1'(c2'+a)
    first.id = kCoordNames[c1];
    first.monomial = identity3();
    first.monomial[c2] = Vec3{0, 0, 0};
    first.monomial[c2][c1] = 1;
    first.translates[c2] = ChartTranslate{c2, alpha};

    ChartSubstitution second;  // c1 = c1'c2', c2 = c2'
    second.id = kCoordNames[c2];
    second.monomial = identity3();
    second.monomial[c1][c2] = 1;

    return {first, second};
}

std::string branch_condition_string(const std::vector<BranchAssignment>& cond) {
    if (cond.empty()) return "-";
    std::ostringstream os;
    for (size_t i = 0; i < cond.size(); ++i) {
        if (i) os << ",";
        os << cond[i].label << (cond[i].status == ConstStatus::Zero ? "=0" : "!=0");
    }
    return os.str();
}

namespace {

struct ResolvedChart {
    Mat3 monomial;  // Zero translates folded in
    std::array<std::optional<ChartTranslate>, 3> translates;  // all Nonzero
};

ResolvedChart resolve_chart(const ChartSubstitution& chart,
                            const std::vector<BranchAssignment>& assignment) {
    ResolvedChart rc;
    rc.monomial = chart.monomial;
    for (int j = 0; j < 3; ++j) {
        if (!chart.translates[j]) continue;
        ChartTranslate t = *chart.translates[j];
        if (t.constant.status == ConstStatus::Generic) {
            for (const auto& a : assignment)
                if (a.label == t.constant.label) t.constant.status = a.status;
            if (t.constant.status == ConstStatus::Generic)
                throw ChartError("unassigned generic constant " + t.constant.label);
        }
        if (t.constant.status == ConstStatus::Zero) {
            rc.monomial[j][t.new_coord] += 1;
        } else {
            rc.translates[j] = t;
        }
    }
    return rc;
}

// image of old coordinate j is a single new coordinate (exponent one, no translate)
std::optional<int> plain_coordinate_image(const ResolvedChart& rc, int j) {
    if (rc.translates[j]) return std::nullopt;
    int coord = -1;
    for (int k = 0; k < 3; ++k) {
        if (rc.monomial[j][k] == 0) continue;
        if (rc.monomial[j][k] != 1 || coord >= 0) return std::nullopt;
        coord = k;
    }
    if (coord < 0) return std::nullopt;
    return coord;
}

SeriesArg substitute_arg(const SeriesArg& arg, const ResolvedChart& rc) {
    SeriesArg out;
    for (int j = 0; j < 3; ++j) {
        Exp e = arg.exponents[j];
        if (e == 0) continue;
        if (e < 0) throw ChartError("negative exponent in series argument");
        for (int k = 0; k < 3; ++k) out.exponents[k] += e * rc.monomial[j][k];
        if (rc.translates[j])
            out.translates.push_back({rc.translates[j]->new_coord, rc.translates[j]->constant, e});
    }
    for (const auto& t : arg.translates) {
        auto plain = plain_coordinate_image(rc, t.coord);
        if (!plain) throw ChartError("series-argument translate coordinate substituted non-trivially");
        out.translates.push_back({*plain, t.constant, t.power});
    }
    return out;
}

void merge_translate(std::vector<TranslatePart>& parts, TranslatePart t) {
    for (auto& p : parts)
        if (p.coord == t.coord && p.constant == t.constant) {
            p.power += t.power;
            return;
        }
    parts.push_back(std::move(t));
}

void canonicalize_factor(RowFactor& f) {
    std::erase_if(f.translates, [](const TranslatePart& t) { return t.power == 0; });
    std::sort(f.translates.begin(), f.translates.end(), [](const auto& a, const auto& b) {
        return std::tie(a.coord, a.constant.label) < std::tie(b.coord, b.constant.label);
    });
    std::erase_if(f.units, [](const UnitSeriesPart& u) { return u.power == 0; });
    std::stable_sort(f.units.begin(), f.units.end(),
                     [](const auto& a, const auto& b) { return a.symbol < b.symbol; });
}

}  // namespace

BranchedForms substitute(const LocalForm& form, const ChartSubstitution& chart) {
    {
        auto violations = validate(form);
        if (!violations.empty())
            throw ChartError("substitute on invalid form: " + violations.front());
        for (const auto& f : form.factors) {
            if (f.mixed) throw ChartError("substitute on a mixed-series row is undefined");
            if (f.centered) throw ChartError("substitute on a recentred row is undefined");
        }
        if (form.has_generic())
            throw ChartError("form carries an unsplit generic constant");
    }

    // enumerate assignments of the chart's generic constants, in label order
    std::vector<std::string> generics;
    for (int j = 0; j < 3; ++j)
        if (chart.translates[j] && chart.translates[j]->constant.status == ConstStatus::Generic)
            generics.push_back(chart.translates[j]->constant.label);
    std::sort(generics.begin(), generics.end());
    generics.erase(std::unique(generics.begin(), generics.end()), generics.end());

    BranchedForms out;
    const size_t n_branches = 1u << generics.size();
    for (size_t mask = 0; mask < n_branches; ++mask) {
        Branch br;
        for (size_t g = 0; g < generics.size(); ++g)
            br.condition.push_back(
                {generics[g], (mask >> g) & 1 ? ConstStatus::Nonzero : ConstStatus::Zero});
        ResolvedChart rc = resolve_chart(chart, br.condition);
        br.effective_monomial = rc.monomial;

        LocalForm nf = form;
        for (int i = 0; i < 3; ++i) {
            Vec3 e{0, 0, 0};
            RowFactor nfactor;
            for (int j = 0; j < 3; ++j) {
                Exp ej = form.exponents[i][j];
                if (ej < 0) throw ChartError("negative exponent");
                if (ej == 0) continue;
                for (int k = 0; k < 3; ++k) e[k] += ej * rc.monomial[j][k];
                if (rc.translates[j])
                    merge_translate(nfactor.translates,
                                    {rc.translates[j]->new_coord, rc.translates[j]->constant, ej});
            }
            for (const auto& t : form.factors[i].translates) {
                if (t.constant.status == ConstStatus::Zero) {
                    // bare coordinate: route it through the monomial part
                    for (int k = 0; k < 3; ++k) e[k] += t.power * rc.monomial[t.coord][k];
                    if (rc.translates[t.coord])
                        merge_translate(nfactor.translates, {rc.translates[t.coord]->new_coord,
                                                             rc.translates[t.coord]->constant,
                                                             t.power});
                    continue;
                }
                auto plain = plain_coordinate_image(rc, t.coord);
                if (!plain)
                    throw ChartError("translate coordinate " + std::string(kCoordNames[t.coord]) +
                                     " substituted non-trivially");
                merge_translate(nfactor.translates, {*plain, t.constant, t.power});
            }
            for (const auto& u : form.factors[i].units) {
                UnitSeriesPart nu;
                nu.symbol = u.symbol;
                nu.power = u.power;
                for (const auto& a : u.args) nu.args.push_back(substitute_arg(a, rc));
                nfactor.units.push_back(std::move(nu));
            }
            canonicalize_factor(nfactor);
            nf.exponents[i] = e;
            nf.factors[i] = std::move(nfactor);
        }

        // the divisor upstairs is the preimage of the old one: the union of
        // the coordinates appearing in the images of old divisor coordinates
        std::array<bool, 3> ndiv{};
        for (int j = 0; j < 3; ++j) {
            if (!form.divisor_up[j]) continue;
            for (int k = 0; k < 3; ++k)
                if (rc.monomial[j][k] > 0) ndiv[k] = true;
        }
        nf.divisor_up = ndiv;
        nf.upstairs = nf.count_up();

        auto violations = validate(nf);
        if (!violations.empty())
            throw ChartError("substitution produced an invalid form: " + violations.front());
        br.result = std::move(nf);
        out.branches.push_back(std::move(br));
    }
    return out;
}

std::optional<LocalForm> divide_rows(const LocalForm& form, int numerator, int denominator) {
    if (numerator == denominator) {
        LocalForm g = form;
        g.exponents[numerator] = {0, 0, 0};
        g.factors[numerator] = RowFactor{};
        return g;
    }
    const RowFactor& den = form.factors[denominator];
    if (!den.is_unit() && !den.trivial())
        throw std::invalid_argument("denominator row factor is not a unit");
    Vec3 diff = sub(form.exponents[numerator], form.exponents[denominator]);
    for (Exp e : diff)
        if (e < 0) return std::nullopt;

    LocalForm g = form;
    g.exponents[numerator] = diff;
    RowFactor nf = form.factors[numerator];
    for (const auto& t : den.translates) merge_translate(nf.translates, {t.coord, t.constant, -t.power});
    for (const auto& u : den.units) {
        UnitSeriesPart inv = u;
        inv.power = -u.power;
        bool merged = false;
        for (auto& mu : nf.units)
            if (mu.symbol == inv.symbol && mu.args == inv.args) {
                mu.power += inv.power;
                merged = true;
                break;
            }
        if (!merged) nf.units.push_back(std::move(inv));
    }
    canonicalize_factor(nf);
    g.factors[numerator] = std::move(nf);
    return g;
}

LocalForm normalize(const LocalForm& form) {
    LocalForm g = form;
    for (int i = 0; i < 3; ++i) {
        RowFactor nf;
        nf.mixed = form.factors[i].mixed;
        std::vector<int> unit_vars;
        for (const auto& t : form.factors[i].translates) {
            if (t.constant.status == ConstStatus::Zero) {
                if (t.power < 0) throw std::invalid_argument("non-unit translate inverted");
                g.exponents[i][t.coord] += t.power;
            } else {
                unit_vars.push_back(t.coord);
            }
        }
        for (const auto& u : form.factors[i].units) nf.units.push_back(u);
        if (!unit_vars.empty()) {
            // absorbed structural record: one opaque unit in the same variables
            std::sort(unit_vars.begin(), unit_vars.end());
            unit_vars.erase(std::unique(unit_vars.begin(), unit_vars.end()), unit_vars.end());
            UnitSeriesPart abs;
            abs.symbol = "unit";
            for (int v : unit_vars) {
                SeriesArg a;
                a.exponents[v] = 1;
                abs.args.push_back(a);
            }
            bool merged = false;
            for (auto& mu : nf.units)
                if (mu.symbol == abs.symbol && mu.args == abs.args) {
                    merged = true;
                    break;
                }
            if (!merged) nf.units.push_back(std::move(abs));
        }
        canonicalize_factor(nf);
        g.factors[i] = std::move(nf);
    }

    // drop divisor bookkeeping for coordinates no divisor row touches
    for (int j = 0; j < 3; ++j) {
        if (!g.divisor_up[j]) continue;
        bool used = false;
        for (int i = 0; i < 3 && !used; ++i)
            if (g.divisor_down[i] && g.exponents[i][j] > 0) used = true;
        if (!used) g.divisor_up[j] = false;
    }
    g.upstairs = g.count_up();
    return g;
}

}  // namespace toroidal
