#include "toroidal/forms.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "toroidal/rational.hpp"

namespace toroidal {

const char* const kCoordNames[3] = {"x", "y", "z"};
const char* const kParamNames[3] = {"u", "v", "w"};

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
bool leq(const Vec3& a, const Vec3& b) { return a[0] <= b[0] && a[1] <= b[1] && a[2] <= b[2]; }
bool is_zero(const Vec3& a) { return a[0] == 0 && a[1] == 0 && a[2] == 0; }

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Exp s = 0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            r[i][j] = s;
        }
    return r;
}

Exp det2(Exp a, Exp b, Exp c, Exp d) { return a * d - b * c; }

Exp det3(const Mat3& m) {
    return m[0][0] * det2(m[1][1], m[1][2], m[2][1], m[2][2]) -
           m[0][1] * det2(m[1][0], m[1][2], m[2][0], m[2][2]) +
           m[0][2] * det2(m[1][0], m[1][1], m[2][0], m[2][1]);
}

Mat3 identity3() { return {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}; }

const char* status_name(ConstStatus s) {
    switch (s) {
        case ConstStatus::Zero: return "zero";
        case ConstStatus::Nonzero: return "nonzero";
        case ConstStatus::Generic: return "generic";
    }
    return "?";
}

bool RowFactor::is_unit() const {
    if (mixed || centered) return false;
    for (const auto& t : translates)
        if (t.constant.status != ConstStatus::Nonzero) return false;
    return true;
}

bool RowFactor::has_generic() const {
    for (const auto& t : translates)
        if (t.constant.status == ConstStatus::Generic) return true;
    for (const auto& u : units)
        for (const auto& a : u.args)
            for (const auto& t : a.translates)
                if (t.constant.status == ConstStatus::Generic) return true;
    return false;
}

RowFactor make_translate(int coord, ConstantClass c, Exp power) {
    RowFactor f;
    f.translates.push_back({coord, std::move(c), power});
    return f;
}

RowFactor make_unit_series(std::string symbol, std::vector<int> vars, Exp power) {
    RowFactor f;
    UnitSeriesPart p;
    p.symbol = std::move(symbol);
    p.power = power;
    for (int v : vars) {
        SeriesArg a;
        a.exponents[v] = 1;
        p.args.push_back(std::move(a));
    }
    f.units.push_back(std::move(p));
    return f;
}

bool LocalForm::has_generic() const {
    for (const auto& f : factors)
        if (f.has_generic()) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

// exponent support of a row with Zero translates folded in
Vec3 effective_exponents(const LocalForm& form, int row) {
    Vec3 e = form.exponents[row];
    for (const auto& t : form.factors[row].translates)
        if (t.constant.status == ConstStatus::Zero && t.power > 0) e[t.coord] += t.power;
    return e;
}

bool row_vanishes(const LocalForm& form, int row) {
    if (!is_zero(effective_exponents(form, row))) return true;
    if (form.factors[row].mixed) return true;  // mixed rows vanish through their monomial part
    if (form.factors[row].centered) return true;
    return false;
}

}  // namespace

std::vector<std::string> validate(const LocalForm& form) {
    std::vector<std::string> v;
    auto fail = [&v](std::string s) { v.push_back(std::move(s)); };

    if (form.upstairs < 1 || form.upstairs > 3) fail("source arity out of range");
    if (form.downstairs < 1 || form.downstairs > 3) fail("target arity out of range");
    if (form.count_up() != form.upstairs) fail("arity mismatch: divisor coordinates vs source arity");
    if (form.count_down() != form.downstairs) fail("arity mismatch: divisor parameters vs target arity");

    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j)
            if (form.exponents[i][j] < 0)
                fail(std::string("negative exponent in row ") + kParamNames[i] + " at " + kCoordNames[j]);
        for (const auto& t : form.factors[i].translates) {
            if (t.coord < 0 || t.coord > 2) fail("translate coordinate out of range");
            if (t.power == 0) fail("translate factor with zero power");
            if (t.power < 0 && t.constant.status != ConstStatus::Nonzero)
                fail(std::string("non-unit translate inverted in row ") + kParamNames[i]);
        }
        if (form.factors[i].centered) {
            if (!is_zero(form.exponents[i]))
                fail(std::string("centred row ") + kParamNames[i] + " with a nontrivial monomial");
            if (form.factors[i].translates.empty() && form.factors[i].units.empty())
                fail(std::string("centred row ") + kParamNames[i] + " with no unit parts");
            for (const auto& t : form.factors[i].translates)
                if (t.constant.status != ConstStatus::Nonzero)
                    fail(std::string("centred row ") + kParamNames[i] + " with a non-unit part");
        }
    }

    // preimage condition: divisor-parameter rows only touch divisor coords
    for (int i = 0; i < 3; ++i) {
        if (!form.divisor_down[i]) continue;
        Vec3 e = effective_exponents(form, i);
        for (int j = 0; j < 3; ++j)
            if (e[j] > 0 && !form.divisor_up[j])
                fail(std::string(kCoordNames[j]) + " outside divisor in row " + kParamNames[i]);
    }

    // every divisor coordinate is cut out by some divisor parameter
    for (int j = 0; j < 3; ++j) {
        if (!form.divisor_up[j]) continue;
        bool covered = false;
        for (int i = 0; i < 3 && !covered; ++i)
            if (form.divisor_down[i] && effective_exponents(form, i)[j] > 0) covered = true;
        if (!covered)
            fail(std::string("divisor coordinate ") + kCoordNames[j] + " not cut out by any divisor parameter");
    }

    for (int i = 0; i < 3; ++i)
        if (!row_vanishes(form, i))
            fail(std::string("parameter ") + kParamNames[i] + " does not vanish at the point");

    return v;
}

// ---------------------------------------------------------------------------
// Row views and the unit-absorption calculus
// ---------------------------------------------------------------------------

namespace {

struct BaseKey {
    int kind;           // 0 translate, 1 unit series
    int coord;          // translate coordinate (kind 0)
    std::string label;  // constant label / series key

    bool operator<(const BaseKey& o) const {
        return std::tie(kind, coord, label) < std::tie(o.kind, o.coord, o.label);
    }
    bool operator==(const BaseKey& o) const = default;
};

struct RowView {
    Vec3 exps{0, 0, 0};
    std::vector<std::pair<BaseKey, Exp>> bases;  // merged unit bases with powers
    bool mixed = false;
    bool generic = false;
    bool centered = false;  // row value is the base product minus its constant term
};

std::array<bool, 3> series_vars(const UnitSeriesPart& u) {
    std::array<bool, 3> s{};
    for (const auto& a : u.args) {
        for (int j = 0; j < 3; ++j)
            if (a.exponents[j] != 0) s[j] = true;
        for (const auto& t : a.translates) s[t.coord] = true;
    }
    return s;
}

std::string series_key(const UnitSeriesPart& u) {
    std::ostringstream os;
    os << u.symbol;
    for (const auto& a : u.args) {
        os << '(';
        for (int j = 0; j < 3; ++j) os << a.exponents[j] << (j < 2 ? "," : "");
        for (const auto& t : a.translates)
            os << ";" << t.coord << "+" << t.constant.label << "^" << t.power;
        os << ')';
    }
    return os.str();
}

struct BaseInfo {
    BaseKey key;
    std::array<bool, 3> vars{};
};

RowView row_view(const LocalForm& form, int row, std::vector<BaseInfo>* registry) {
    RowView rv;
    rv.exps = form.exponents[row];
    const RowFactor& f = form.factors[row];
    rv.mixed = f.mixed.has_value();
    rv.generic = f.has_generic();
    rv.centered = f.centered;
    if (rv.generic) return rv;

    auto add_base = [&](const BaseKey& k, std::array<bool, 3> vars, Exp power) {
        for (auto& [bk, p] : rv.bases)
            if (bk == k) {
                p += power;
                return;
            }
        rv.bases.emplace_back(k, power);
        if (registry) {
            for (const auto& b : *registry)
                if (b.key == k) return;
            registry->push_back({k, vars});
        }
    };

    for (const auto& t : f.translates) {
        if (t.constant.status == ConstStatus::Zero) {
            rv.exps[t.coord] += t.power;  // bare coordinate
        } else {
            add_base({0, t.coord, t.constant.label}, {t.coord == 0, t.coord == 1, t.coord == 2},
                     t.power);
        }
    }
    for (const auto& u : f.units) add_base({1, 0, series_key(u)}, series_vars(u), u.power);
    std::erase_if(rv.bases, [](const auto& b) { return b.second == 0; });
    std::sort(rv.bases.begin(), rv.bases.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return rv;
}

Exp base_power(const RowView& rv, const BaseKey& k) {
    for (const auto& [bk, p] : rv.bases)
        if (bk == k) return p;
    return 0;
}

bool row_is_unit_monomial(const RowView& rv) { return !rv.mixed && !rv.generic && !rv.centered; }

// Absorption of unit factors into the coordinates of `absorb_rows`:
// solves, for each base, sum_c exps[r][c] * xi[c] = -power_r over the
// coordinates in `coords`; consistent whenever the exponent matrix of the
// absorbing rows has full row rank over those coordinates. Returns, for the
// target row, the net power of each base after absorption, or nothing when
// the system is inconsistent.
struct NetPowers {
    std::vector<std::pair<BaseKey, Rat>> nets;
    Rat net(const BaseKey& k) const {
        for (const auto& [bk, p] : nets)
            if (bk == k) return p;
        return Rat(0);
    }
};

std::optional<NetPowers> absorb_and_net(const std::vector<const RowView*>& absorb_rows,
                                        const std::vector<int>& coords, const RowView& target,
                                        const std::vector<BaseInfo>& registry) {
    const size_t n = absorb_rows.size(), m = coords.size();
    NetPowers out;
    for (const auto& base : registry) {
        // Solve A xi = -p by Gaussian elimination over Q; A is n x m.
        std::vector<std::vector<Rat>> a(n, std::vector<Rat>(m + 1, Rat(0)));
        for (size_t r = 0; r < n; ++r) {
            for (size_t c = 0; c < m; ++c) a[r][c] = rat_of(absorb_rows[r]->exps[coords[c]]);
            a[r][m] = rat_of(-base_power(*absorb_rows[r], base.key));
        }
        std::vector<int> pivot_col(n, -1);
        size_t rank = 0;
        for (size_t c = 0; c < m && rank < n; ++c) {
            size_t piv = rank;
            while (piv < n && a[piv][c] == 0) ++piv;
            if (piv == n) continue;
            std::swap(a[piv], a[rank]);
            for (size_t r = 0; r < n; ++r) {
                if (r == rank || a[r][c] == 0) continue;
                Rat f = a[r][c] / a[rank][c];
                for (size_t cc = 0; cc <= m; ++cc) a[r][cc] -= f * a[rank][cc];
            }
            pivot_col[rank] = static_cast<int>(c);
            ++rank;
        }
        for (size_t r = rank; r < n; ++r)
            if (a[r][m] != 0) return std::nullopt;  // inconsistent: unit not absorbable
        std::vector<Rat> xi(m, Rat(0));
        for (size_t r = 0; r < rank; ++r) xi[pivot_col[r]] = a[r][m] / a[r][pivot_col[r]];

        Rat net = rat_of(base_power(target, base.key));
        for (size_t c = 0; c < m; ++c) net += rat_of(target.exps[coords[c]]) * xi[c];
        if (net != 0) out.nets.emplace_back(base.key, net);
    }
    return out;
}

const BaseInfo* find_base(const std::vector<BaseInfo>& registry, const BaseKey& k) {
    for (const auto& b : registry)
        if (b.key == k) return &b;
    return nullptr;
}

// After absorption, is the target row a monomial times a fresh translate in
// coordinate `coord`? Requires exactly one surviving base keyed to that
// coordinate and no surviving base whose variables touch it otherwise.
bool effective_translate_in(const NetPowers& nets, int coord,
                            const std::vector<BaseInfo>& registry) {
    int anchors = 0;
    for (const auto& [key, net] : nets.nets) {
        const BaseInfo* info = find_base(registry, key);
        if (!info) return false;
        if (key.kind == 0 && key.coord == coord) {
            ++anchors;
        } else if (info->vars[coord]) {
            return false;  // an opaque unit in the same variable could spoil the translate
        }
    }
    return anchors == 1;
}

// No surviving base touches `coord` at all (used for triangular independence).
bool nets_avoid(const NetPowers& nets, int coord, const std::vector<BaseInfo>& registry) {
    for (const auto& [key, net] : nets.nets) {
        const BaseInfo* info = find_base(registry, key);
        if (info && info->vars[coord]) return false;
    }
    return true;
}

std::vector<int> divisor_coords(const LocalForm& form) {
    std::vector<int> c;
    for (int j = 0; j < 3; ++j)
        if (form.divisor_up[j]) c.push_back(j);
    return c;
}

std::vector<int> free_coords(const LocalForm& form) {
    std::vector<int> c;
    for (int j = 0; j < 3; ++j)
        if (!form.divisor_up[j]) c.push_back(j);
    return c;
}

bool supported_on(const Vec3& e, const std::vector<int>& coords) {
    for (int j = 0; j < 3; ++j) {
        if (e[j] == 0) continue;
        if (std::find(coords.begin(), coords.end(), j) == coords.end()) return false;
    }
    return true;
}

// row == single coordinate `coord` to the first power, times a unit
bool bare_coordinate_row(const RowView& rv, int coord) {
    if (!row_is_unit_monomial(rv)) return false;
    Vec3 want{0, 0, 0};
    want[coord] = 1;
    return rv.exps == want;
}

// The row vanishes and cuts a fresh coordinate in the direction of `coord`:
// the bare coordinate itself, or a recentred unit difference whose partial
// there is a nonzero constant.
bool vanishing_coordinate_row(const RowView& rv, int coord,
                              const std::vector<BaseInfo>& registry) {
    if (bare_coordinate_row(rv, coord)) return true;
    if (!rv.centered || rv.mixed || rv.generic) return false;
    bool anchor = false;
    for (const auto& [key, power] : rv.bases) {
        if (key.kind == 0 && key.coord == coord) {
            if (power != 0) anchor = true;
        } else {
            const BaseInfo* info = find_base(registry, key);
            if (info && info->vars[coord]) return false;  // opaque dependence on the coordinate
        }
    }
    return anchor;
}

// whether the row's linear part can touch `coord` at all
bool row_touches(const RowView& rv, int coord, const std::vector<BaseInfo>& registry) {
    if (!rv.centered) {
        Vec3 want{0, 0, 0};
        want[coord] = 1;
        return rv.exps == want;  // a bare row touches exactly its own coordinate
    }
    for (const auto& [key, power] : rv.bases) {
        if (key.kind == 0 && key.coord == coord) return true;
        const BaseInfo* info = find_base(registry, key);
        if (info && info->vars[coord]) return true;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pair classification
// ---------------------------------------------------------------------------

const char* pair_case_name(PairCase c) {
    switch (c) {
        case PairCase::PowerTranslate: return "power-translate";
        case PairCase::IndependentMonomials: return "independent-monomials";
        case PairCase::ProportionalTranslate: return "proportional-translate";
        case PairCase::RankTwo: return "rank-two";
        case PairCase::PowerCoordinate: return "power-coordinate";
        case PairCase::ProportionalCoordinate: return "proportional-coordinate";
    }
    return "?";
}

namespace {

// primitive direction of a rank-one pair of 2d rows; returns (p, q, k1, k2)
std::optional<std::array<Exp, 4>> proportional_direction(Exp a, Exp b, Exp c, Exp d) {
    if (a * d - b * c != 0) return std::nullopt;
    if ((a == 0 && b == 0) || (c == 0 && d == 0)) return std::nullopt;
    Exp g = std::gcd(a, b);
    Exp p = a / g, q = b / g;
    Exp k2 = p != 0 ? c / p : d / q;
    if (c != k2 * p || d != k2 * q) return std::nullopt;
    return std::array<Exp, 4>{p, q, g, k2};
}

}  // namespace

std::optional<PairClass> classify_toroidal_pair(const LocalForm& form, int p1, int p2) {
    if (p1 == p2) return std::nullopt;
    std::vector<BaseInfo> registry;
    RowView r1 = row_view(form, p1, &registry);
    RowView r2 = row_view(form, p2, &registry);
    if (r1.mixed || r2.mixed || r1.generic || r2.generic) return std::nullopt;

    const auto div = divisor_coords(form);
    const auto free = free_coords(form);
    const bool target_deep = form.downstairs >= 2;  // 2- or 3-point downstairs

    if (form.upstairs == 1) {
        const int X = div[0];
        if (!row_is_unit_monomial(r1) || !supported_on(r1.exps, div)) return std::nullopt;
        const Exp a = r1.exps[X];
        if (a < 1) return std::nullopt;
        if (target_deep) {
            // u = x^a, v = x^b (alpha + y)
            if (!row_is_unit_monomial(r2) || !supported_on(r2.exps, div)) return std::nullopt;
            const Exp b = r2.exps[X];
            if (b < 1) return std::nullopt;
            auto nets = absorb_and_net({&r1}, {X}, r2, registry);
            if (!nets) return std::nullopt;
            for (int t : free)
                if (effective_translate_in(*nets, t, registry)) {
                    PairClass pc{PairCase::PowerTranslate};
                    pc.detail[0] = a;
                    pc.detail[1] = b;
                    return pc;
                }
            return std::nullopt;
        }
        // target 1-point: u = x^a, v = y
        for (int t : free)
            if (vanishing_coordinate_row(r2, t, registry)) {
                PairClass pc{PairCase::PowerCoordinate};
                pc.detail[0] = a;
                return pc;
            }
        return std::nullopt;
    }

    if (form.upstairs == 2) {
        const int X = div[0], Y = div[1];
        if (!row_is_unit_monomial(r1) || !supported_on(r1.exps, div)) return std::nullopt;
        const Exp a = r1.exps[X], b = r1.exps[Y];
        if (target_deep) {
            if (!row_is_unit_monomial(r2) || !supported_on(r2.exps, div)) return std::nullopt;
            const Exp c = r2.exps[X], d = r2.exps[Y];
            Exp det = det2(a, b, c, d);
            if (det != 0) {
                PairClass pc{PairCase::IndependentMonomials};
                pc.detail[0] = det;
                return pc;
            }
            // proportional rows: u = (x^p y^q)^k, v = (x^p y^q)^t (alpha + z)
            auto dir = proportional_direction(a, b, c, d);
            if (!dir) return std::nullopt;
            auto [p, q, k, t] = *dir;
            if (p <= 0 || q <= 0 || k <= 0 || t <= 0) return std::nullopt;
            auto nets = absorb_and_net({&r1}, {X}, r2, registry);
            if (!nets) return std::nullopt;
            for (int tc : free)
                if (effective_translate_in(*nets, tc, registry)) {
                    PairClass pc{PairCase::ProportionalTranslate};
                    pc.detail[0] = p;
                    pc.detail[1] = q;
                    pc.detail[2] = k;
                    pc.detail[3] = t;
                    return pc;
                }
            return std::nullopt;
        }
        // target 1-point: u = (x^p y^q)^k, v = z
        if (a <= 0 || b <= 0) return std::nullopt;
        Exp g = std::gcd(a, b);
        for (int tc : free)
            if (vanishing_coordinate_row(r2, tc, registry)) {
                PairClass pc{PairCase::ProportionalCoordinate};
                pc.detail[0] = a / g;
                pc.detail[1] = b / g;
                pc.detail[2] = g;
                return pc;
            }
        return std::nullopt;
    }

    // upstairs 3-point
    if (!target_deep) return std::nullopt;
    if (!row_is_unit_monomial(r1) || !row_is_unit_monomial(r2)) return std::nullopt;
    Mat3 m{};
    m[0] = r1.exps;
    m[1] = r2.exps;
    Exp d01 = det2(m[0][0], m[0][1], m[1][0], m[1][1]);
    Exp d02 = det2(m[0][0], m[0][2], m[1][0], m[1][2]);
    Exp d12 = det2(m[0][1], m[0][2], m[1][1], m[1][2]);
    if (d01 == 0 && d02 == 0 && d12 == 0) return std::nullopt;
    PairClass pc{PairCase::RankTwo};
    pc.detail[0] = d01;
    pc.detail[1] = d02;
    pc.detail[2] = d12;
    return pc;
}

// ---------------------------------------------------------------------------
// Morphism classification
// ---------------------------------------------------------------------------

std::optional<MorphClass> classify_toroidal_morphism(const LocalForm& form) {
    if (!validate(form).empty() || form.has_generic()) return std::nullopt;
    std::vector<BaseInfo> registry;
    RowView rows[3] = {row_view(form, 0, &registry), row_view(form, 1, &registry),
                       row_view(form, 2, &registry)};
    for (const auto& r : rows)
        if (r.mixed) return std::nullopt;

    const auto div = divisor_coords(form);
    const auto free = free_coords(form);
    const int p_ar = form.upstairs, q_ar = form.downstairs;

    std::vector<int> div_params, free_params;
    for (int i = 0; i < 3; ++i)
        (form.divisor_down[i] ? div_params : free_params).push_back(i);

    auto result = [&](int case_index, std::array<int, 3> assignment) {
        MorphClass mc{p_ar, q_ar, case_index, assignment};
        return std::optional<MorphClass>(mc);
    };

    if (p_ar == 3 && q_ar == 3) {
        // all rows monomials in the divisor coordinates, invertible exponent matrix
        for (const auto& r : rows)
            if (!row_is_unit_monomial(r)) return std::nullopt;
        Mat3 e{rows[0].exps, rows[1].exps, rows[2].exps};
        if (det3(e) == 0) return std::nullopt;
        return result(1, {0, 1, 2});
    }

    if (p_ar == 2 && q_ar == 3) {
        const int X = div[0], Y = div[1];
        const int Z = free[0];
        // two independent monomial rows plus a monomial times a translate in z
        for (int wslot = 0; wslot < 3; ++wslot) {
            int i = (wslot + 1) % 3, j = (wslot + 2) % 3;
            if (i > j) std::swap(i, j);
            const RowView &ru = rows[i], &rv = rows[j], &rw = rows[wslot];
            if (!row_is_unit_monomial(ru) || !row_is_unit_monomial(rv) ||
                !row_is_unit_monomial(rw))
                continue;
            if (det2(ru.exps[X], ru.exps[Y], rv.exps[X], rv.exps[Y]) == 0) continue;
            if (rw.exps[X] + rw.exps[Y] <= 0) continue;
            auto nets = absorb_and_net({&ru, &rv}, {X, Y}, rw, registry);
            if (!nets || !effective_translate_in(*nets, Z, registry)) continue;
            return result(2, {i, j, wslot});
        }
        return std::nullopt;
    }

    if (p_ar == 1 && q_ar == 3) {
        const int X = div[0];
        // u = x^a, v = x^d (y + alpha), w = x^g (z + beta)
        for (int uslot = 0; uslot < 3; ++uslot)
            for (int swap = 0; swap < 2; ++swap) {
                int vslot = (uslot + 1 + swap) % 3;
                int wslot = (uslot + 2 - swap) % 3;
                const RowView &ru = rows[uslot], &rv = rows[vslot], &rw = rows[wslot];
                if (!row_is_unit_monomial(ru) || !row_is_unit_monomial(rv) ||
                    !row_is_unit_monomial(rw))
                    continue;
                if (ru.exps[X] < 1 || rv.exps[X] < 1 || rw.exps[X] < 1) continue;
                if (!supported_on(ru.exps, div) || !supported_on(rv.exps, div) ||
                    !supported_on(rw.exps, div))
                    continue;
                auto net_v = absorb_and_net({&ru}, {X}, rv, registry);
                auto net_w = absorb_and_net({&ru}, {X}, rw, registry);
                if (!net_v || !net_w) continue;
                for (int cy : free)
                    for (int cz : free) {
                        if (cy == cz) continue;
                        if (!effective_translate_in(*net_v, cy, registry)) continue;
                        if (!effective_translate_in(*net_w, cz, registry)) continue;
                        // triangular independence of the two fresh coordinates
                        if (!nets_avoid(*net_w, cy, registry) &&
                            !nets_avoid(*net_v, cz, registry))
                            continue;
                        return result(3, {uslot, vslot, wslot});
                    }
            }
        return std::nullopt;
    }

    if (p_ar == 2 && q_ar == 2) {
        if (div_params.size() != 2) return std::nullopt;
        const int X = div[0], Y = div[1];
        const RowView &ru = rows[div_params[0]], &rv = rows[div_params[1]];
        const RowView& rw = rows[free_params[0]];
        if (!row_is_unit_monomial(ru) || !row_is_unit_monomial(rv)) return std::nullopt;
        if (det2(ru.exps[X], ru.exps[Y], rv.exps[X], rv.exps[Y]) == 0) return std::nullopt;
        for (int t : free)
            if (vanishing_coordinate_row(rw, t, registry))
                return result(4, {div_params[0], div_params[1], free_params[0]});
        return std::nullopt;
    }

    if (p_ar == 1 && q_ar == 2) {
        if (div_params.size() != 2) return std::nullopt;
        const int X = div[0];
        const RowView& rw = rows[free_params[0]];
        int wcoord = -1;
        for (int t : free)
            if (vanishing_coordinate_row(rw, t, registry)) wcoord = t;
        if (wcoord < 0) return std::nullopt;
        for (int swap = 0; swap < 2; ++swap) {
            int ui = div_params[swap], vi = div_params[1 - swap];
            const RowView &ru = rows[ui], &rv = rows[vi];
            if (!row_is_unit_monomial(ru) || !row_is_unit_monomial(rv)) continue;
            if (!supported_on(ru.exps, div) || !supported_on(rv.exps, div)) continue;
            if (ru.exps[X] < 1 || rv.exps[X] < 1) continue;
            auto nets = absorb_and_net({&ru}, {X}, rv, registry);
            if (!nets) continue;
            for (int cy : free) {
                if (cy == wcoord) continue;
                if (!effective_translate_in(*nets, cy, registry)) continue;
                // the two fresh coordinates must stay independent
                if (row_touches(rw, cy, registry) && !nets_avoid(*nets, wcoord, registry))
                    continue;
                return result(5, {ui, vi, free_params[0]});
            }
        }
        return std::nullopt;
    }

    if (p_ar == 1 && q_ar == 1) {
        if (div_params.size() != 1) return std::nullopt;
        const int X = div[0];
        const RowView& ru = rows[div_params[0]];
        if (!row_is_unit_monomial(ru) || !supported_on(ru.exps, div) || ru.exps[X] < 1)
            return std::nullopt;
        for (int swap = 0; swap < 2; ++swap) {
            int vi = free_params[swap], wi = free_params[1 - swap];
            for (int cy : free)
                for (int cz : free) {
                    if (cy == cz) continue;
                    if (!vanishing_coordinate_row(rows[vi], cy, registry)) continue;
                    if (!vanishing_coordinate_row(rows[wi], cz, registry)) continue;
                    if (row_touches(rows[vi], cz, registry) &&
                        row_touches(rows[wi], cy, registry))
                        continue;
                    return result(6, {div_params[0], vi, wi});
                }
        }
        return std::nullopt;
    }

    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Prepared classification
// ---------------------------------------------------------------------------

const char* prepared_case_name(PreparedCase c) {
    switch (c) {
        case PreparedCase::One: return "1";
        case PreparedCase::TwoA: return "2a";
        case PreparedCase::TwoB: return "2b";
        case PreparedCase::TwoC: return "2c";
        case PreparedCase::Three: return "3";
    }
    return "?";
}

namespace {

bool row_unit_times_divisor_monomial(const LocalForm& form, int row) {
    std::vector<BaseInfo> reg;
    RowView rv = row_view(form, row, &reg);
    if (!row_is_unit_monomial(rv)) return false;
    return supported_on(rv.exps, divisor_coords(form));
}

std::optional<Classification> try_mixed_two_b(const LocalForm& form) {
    if (form.upstairs != 1) return std::nullopt;
    const int X = divisor_coords(form)[0];
    std::vector<int> div_params, free_params;
    for (int i = 0; i < 3; ++i)
        (form.divisor_down[i] ? div_params : free_params).push_back(i);
    if (div_params.size() != 2 || free_params.size() != 1) return std::nullopt;

    std::vector<BaseInfo> reg;
    RowView rfree = row_view(form, free_params[0], &reg);
    int Y = -1;
    for (int t : free_coords(form))
        if (bare_coordinate_row(rfree, t)) Y = t;
    if (Y < 0) return std::nullopt;
    int Z = -1;
    for (int t : free_coords(form))
        if (t != Y) Z = t;

    for (int swap = 0; swap < 2; ++swap) {
        int ui = div_params[swap], vi = div_params[1 - swap];
        const RowFactor& vf = form.factors[vi];
        if (!vf.mixed) continue;
        if (!row_unit_times_divisor_monomial(form, ui)) continue;
        if (form.exponents[ui][X] < 1) continue;
        const MixedSeries& mx = *vf.mixed;
        // gamma(x, y) + x^d z
        if (mx.gamma_args.size() != 2) continue;
        Vec3 ax{0, 0, 0}, ay{0, 0, 0};
        ax[X] = 1;
        ay[Y] = 1;
        bool args_ok = (mx.gamma_args[0].exponents == ax && mx.gamma_args[1].exponents == ay) ||
                       (mx.gamma_args[0].exponents == ay && mx.gamma_args[1].exponents == ax);
        if (!args_ok) continue;
        if (!mx.tail_coord || *mx.tail_coord != Z) continue;
        if (!supported_on(mx.tail_exponents, {X})) continue;
        if (!supported_on(form.exponents[vi], {X})) continue;
        Classification c;
        c.prepared = true;
        c.prepared_case = PreparedCase::TwoB;
        c.pair_params = {ui, vi};
        return c;
    }
    return std::nullopt;
}

std::optional<Classification> try_mixed_two_c(const LocalForm& form) {
    if (form.upstairs != 2) return std::nullopt;
    const auto div = divisor_coords(form);
    const int X = div[0], Y = div[1];
    std::vector<int> div_params, free_params;
    for (int i = 0; i < 3; ++i)
        (form.divisor_down[i] ? div_params : free_params).push_back(i);
    if (div_params.size() != 2 || free_params.size() != 1) return std::nullopt;

    std::vector<BaseInfo> reg;
    RowView rfree = row_view(form, free_params[0], &reg);
    int Z = -1;
    for (int t : free_coords(form))
        if (bare_coordinate_row(rfree, t)) Z = t;
    if (Z < 0) return std::nullopt;

    for (int swap = 0; swap < 2; ++swap) {
        int ui = div_params[swap], vi = div_params[1 - swap];
        const RowFactor& vf = form.factors[vi];
        if (!vf.mixed) continue;
        if (!row_unit_times_divisor_monomial(form, ui)) continue;
        Exp a = form.exponents[ui][X], b = form.exponents[ui][Y];
        if (a <= 0 || b <= 0) continue;
        Exp k = std::gcd(a, b);
        Exp p = a / k, q = b / k;
        // v-row monomial proportional to the primitive direction
        Exp c0 = form.exponents[vi][X], d0 = form.exponents[vi][Y];
        if (c0 * q != d0 * p) continue;
        const MixedSeries& mx = *vf.mixed;
        // gamma(x^p y^q, z) + x^c y^d with p d - q c != 0
        if (mx.gamma_args.size() != 2) continue;
        Vec3 adir{0, 0, 0}, az{0, 0, 0};
        adir[X] = p;
        adir[Y] = q;
        az[Z] = 1;
        bool args_ok = (mx.gamma_args[0].exponents == adir && mx.gamma_args[1].exponents == az) ||
                       (mx.gamma_args[0].exponents == az && mx.gamma_args[1].exponents == adir);
        if (!args_ok) continue;
        if (mx.tail_coord) continue;
        Exp tc = mx.tail_exponents[X], td = mx.tail_exponents[Y];
        if (!supported_on(mx.tail_exponents, div)) continue;
        if (p * td - q * tc == 0) continue;
        Classification c;
        c.prepared = true;
        c.prepared_case = PreparedCase::TwoC;
        c.pair_params = {ui, vi};
        return c;
    }
    return std::nullopt;
}

}  // namespace

Classification classify_prepared(const LocalForm& form) {
    Classification out;
    auto violations = validate(form);
    if (!violations.empty()) {
        out.reason = "invalid form: " + violations.front();
        return out;
    }
    if (form.has_generic()) {
        out.reason = "generic constant must be split before classification";
        return out;
    }
    out.morphism = classify_toroidal_morphism(form);

    if (form.downstairs == 3) {
        for (int i = 0; i < 3; ++i)
            if (!row_unit_times_divisor_monomial(form, i)) {
                out.reason = std::string("parameter ") + kParamNames[i] +
                             " is not a unit times a divisor monomial";
                return out;
            }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                if (i == j) continue;
                if (auto pc = classify_toroidal_pair(form, i, j)) {
                    out.prepared = true;
                    out.prepared_case = PreparedCase::One;
                    out.pair = pc;
                    out.pair_params = {i, j};
                    return out;
                }
            }
        out.reason = "no permutation of the parameters is a toroidal pair";
        return out;
    }

    if (form.downstairs == 2) {
        std::vector<int> div_params;
        for (int i = 0; i < 3; ++i)
            if (form.divisor_down[i]) div_params.push_back(i);
        for (int swap = 0; swap < 2; ++swap) {
            int i = div_params[swap], j = div_params[1 - swap];
            if (auto pc = classify_toroidal_pair(form, i, j)) {
                out.prepared = true;
                out.prepared_case = PreparedCase::TwoA;
                out.pair = pc;
                out.pair_params = {i, j};
                return out;
            }
        }
        if (auto c = try_mixed_two_b(form)) {
            c->morphism = out.morphism;
            return *c;
        }
        if (auto c = try_mixed_two_c(form)) {
            c->morphism = out.morphism;
            return *c;
        }
        out.reason = "divisor pair is not toroidal and no structural pattern matches";
        return out;
    }

    // 1-point downstairs
    std::vector<int> div_params, free_params;
    for (int i = 0; i < 3; ++i)
        (form.divisor_down[i] ? div_params : free_params).push_back(i);
    for (int s : free_params) {
        if (auto pc = classify_toroidal_pair(form, div_params[0], s)) {
            out.prepared = true;
            out.prepared_case = PreparedCase::Three;
            out.pair = pc;
            out.pair_params = {div_params[0], s};
            return out;
        }
    }
    out.reason = "no free parameter completes the divisor parameter to a toroidal pair";
    return out;
}

// ---------------------------------------------------------------------------
// Cuspidal scenes
// ---------------------------------------------------------------------------

CuspidalReport check_cuspidal(const Scene& scene) {
    std::set<std::string> names;
    for (const auto& c : scene.components) names.insert(c.name);
    for (const auto& t : scene.two_curves) {
        if (!names.count(t.component_a) || !names.count(t.component_b))
            throw std::invalid_argument("two-curve " + t.name + " references an unknown component");
    }
    CuspidalReport r;
    r.cuspidal = true;
    r.strongly_cuspidal = true;
    auto visit = [&r](const std::string& name, bool has3, bool toroidal) {
        if (!has3) {
            r.strongly_cuspidal = false;
            if (!toroidal) {
                r.cuspidal = false;
                r.offending.push_back(name);
            }
        }
    };
    for (const auto& c : scene.components) visit(c.name, c.has_3_point, c.toroidal_neighborhood);
    for (const auto& t : scene.two_curves) visit(t.name, t.has_3_point, t.toroidal_neighborhood);
    return r;
}

}  // namespace toroidal
