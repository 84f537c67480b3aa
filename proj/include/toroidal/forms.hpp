#ifndef TOROIDAL_FORMS_HPP
#define TOROIDAL_FORMS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace toroidal {

// ---------------------------------------------------------------------------
// Scalars and small linear algebra
// ---------------------------------------------------------------------------

using Exp = long long;
using Vec3 = std::array<Exp, 3>;
using Mat3 = std::array<Vec3, 3>;

Vec3 add(const Vec3& a, const Vec3& b);
Vec3 sub(const Vec3& a, const Vec3& b);
bool leq(const Vec3& a, const Vec3& b);     // componentwise <=
bool is_zero(const Vec3& a);
Mat3 mat_mul(const Mat3& a, const Mat3& b); // row-vector convention: (a*b)[i] = a[i]·b
Exp det3(const Mat3& m);
Exp det2(Exp a, Exp b, Exp c, Exp d);
Mat3 identity3();

// Coordinate / parameter indices are fixed: 0,1,2 = x,y,z upstairs and u,v,w
// downstairs. Permutations that appear in results are explicit data.
extern const char* const kCoordNames[3];
extern const char* const kParamNames[3];

// ---------------------------------------------------------------------------
// Symbolic constants
// ---------------------------------------------------------------------------

enum class ConstStatus { Zero, Nonzero, Generic };

// A field constant known only by its vanishing class. Generic constants are
// never evaluated; they are split into a Zero branch and a Nonzero branch.
struct ConstantClass {
    ConstStatus status = ConstStatus::Nonzero;
    std::string label;  // e.g. "alpha", "beta2"

    bool operator==(const ConstantClass&) const = default;
};

const char* status_name(ConstStatus s);

// ---------------------------------------------------------------------------
// Row factors
// ---------------------------------------------------------------------------

// (constant + coord)^power. power may be negative only for Nonzero constants
// (the factor is then a unit raised to a negative power).
struct TranslatePart {
    int coord = 0;
    ConstantClass constant;
    Exp power = 1;

    bool operator==(const TranslatePart&) const = default;
};

// A monomial argument of an opaque unit series: prod coord^e * prod (c+t)^p.
// Input series have bare-coordinate arguments; substitution composes them.
struct SeriesArg {
    Vec3 exponents{0, 0, 0};
    std::vector<TranslatePart> translates;

    bool operator==(const SeriesArg&) const = default;
};

// gamma(args)^power with gamma(0) != 0. Opaque for classification; the
// sampling oracle instantiates gamma as 1 + (sum of its arguments).
struct UnitSeriesPart {
    std::string symbol;
    std::vector<SeriesArg> args;
    Exp power = 1;

    bool operator==(const UnitSeriesPart&) const = default;
};

// Declared structural pattern (gamma(args) + tail); classification-only, no
// blow-up transform is defined for rows carrying it.
struct MixedSeries {
    std::vector<SeriesArg> gamma_args;
    Vec3 tail_exponents{0, 0, 0};
    std::optional<int> tail_coord;

    bool operator==(const MixedSeries&) const = default;
};

struct RowFactor {
    std::vector<TranslatePart> translates;
    std::vector<UnitSeriesPart> units;
    std::optional<MixedSeries> mixed;
    // Row value is (product of parts) minus its constant term: the recentred
    // parameter of a target chart. Requires all-zero exponents; vanishes at
    // the origin by construction. Terminal only: no blow-up transform.
    bool centered = false;

    bool trivial() const { return translates.empty() && units.empty() && !mixed && !centered; }
    // no Zero-translate with positive power, no mixed part: the factor is a
    // unit in a neighborhood of the origin
    bool is_unit() const;
    bool has_generic() const;

    bool operator==(const RowFactor&) const = default;
};

RowFactor make_translate(int coord, ConstantClass c, Exp power = 1);
RowFactor make_unit_series(std::string symbol, std::vector<int> vars, Exp power = 1);

// ---------------------------------------------------------------------------
// Local forms
// ---------------------------------------------------------------------------

// Local monomial presentation of a morphism germ: row i gives the pullback of
// target parameter i (u,v,w) as x^{e0} y^{e1} z^{e2} times its row factor.
struct LocalForm {
    int upstairs = 1;    // arity of the source point (1-, 2- or 3-point)
    int downstairs = 1;  // arity of the target point
    Mat3 exponents{};
    std::array<RowFactor, 3> factors{};
    std::array<bool, 3> divisor_up{};    // which of x,y,z cut the source divisor
    std::array<bool, 3> divisor_down{};  // which of u,v,w cut the target divisor

    int count_up() const { return divisor_up[0] + divisor_up[1] + divisor_up[2]; }
    int count_down() const { return divisor_down[0] + divisor_down[1] + divisor_down[2]; }
    bool has_generic() const;

    bool operator==(const LocalForm&) const = default;
};

// Empty iff all LocalForm invariants hold; each entry names the failed one.
std::vector<std::string> validate(const LocalForm& form);

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

// The six shapes a pair of target parameters can take.
enum class PairCase {
    PowerTranslate,          // u=x^a, v=x^b(alpha+y)            (target 2/3-point)
    IndependentMonomials,    // u=x^a y^b, v=x^c y^d, ad-bc != 0
    ProportionalTranslate,   // u=(x^a y^b)^k, v=(x^a y^b)^t (alpha+z)
    RankTwo,                 // u,v monomials, rank 2
    PowerCoordinate,         // u=x^a, v=y                       (target 1-point)
    ProportionalCoordinate,  // u=(x^a y^b)^k, v=z
};
const char* pair_case_name(PairCase c);

struct PairClass {
    PairCase kind;
    // extracted data for re-checking: primitive direction and multiples for
    // the proportional cases, determinant for the independent case
    Exp detail[4] = {0, 0, 0, 0};
};

// The six local shapes of a monomial morphism, indexed 1..6 by the
// (source arity, target arity) pair.
struct MorphClass {
    int source_arity;
    int target_arity;
    int case_index;          // 1..6
    std::array<int, 3> row_assignment;  // catalog slot -> form row
};

enum class PreparedCase { One, TwoA, TwoB, TwoC, Three };
const char* prepared_case_name(PreparedCase c);

struct Classification {
    bool prepared = false;
    std::optional<PreparedCase> prepared_case;
    std::optional<PairClass> pair;        // witnessing pair class, when any
    std::array<int, 2> pair_params{0, 1}; // ordered witnessing parameters
    std::optional<MorphClass> morphism;
    std::string reason;                   // first failed condition when not prepared
};

// Matches an ordered pair of target parameters against the pair catalog;
// dispatches on the target arity. Rows carrying mixed-series factors are
// rejected (empty result).
std::optional<PairClass> classify_toroidal_pair(const LocalForm& form, int p1, int p2);

// Matches the full parameter triple against the six-shape catalog.
std::optional<MorphClass> classify_toroidal_morphism(const LocalForm& form);

Classification classify_prepared(const LocalForm& form);

// ---------------------------------------------------------------------------
// Divisor adjacency scenes
// ---------------------------------------------------------------------------

struct SceneComponent {
    std::string name;
    bool has_3_point = false;
    bool toroidal_neighborhood = false;
};

struct SceneTwoCurve {
    std::string name;
    std::string component_a, component_b;
    bool has_3_point = false;
    bool toroidal_neighborhood = false;
};

struct Scene {
    std::vector<SceneComponent> components;
    std::vector<SceneTwoCurve> two_curves;
};

struct CuspidalReport {
    bool cuspidal = false;
    bool strongly_cuspidal = false;
    std::vector<std::string> offending;  // loci breaking the cuspidal condition
};

// Throws std::invalid_argument on malformed adjacency (a two-curve naming an
// unknown component).
CuspidalReport check_cuspidal(const Scene& scene);

}  // namespace toroidal

#endif
