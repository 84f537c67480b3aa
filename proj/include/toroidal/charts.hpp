#ifndef TOROIDAL_CHARTS_HPP
#define TOROIDAL_CHARTS_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "toroidal/forms.hpp"

namespace toroidal {

// ---------------------------------------------------------------------------
// Centers and chart substitutions
// ---------------------------------------------------------------------------

enum class CenterKind { Point, Curve, TwoCurve };

struct Center {
    CenterKind kind = CenterKind::Point;
    std::array<int, 2> coords{0, 2};  // vanishing coordinates for curve centers

    bool operator==(const Center&) const = default;
};

struct ChartTranslate {
    int new_coord = 0;
    ConstantClass constant;

    bool operator==(const ChartTranslate&) const = default;
};

// One coordinate patch of a blow-up: old coordinate j maps to the monomial in
// new coordinates given by row j of `monomial`, times its optional translate.
struct ChartSubstitution {
    std::string id;  // "x", "y" or "z": the direction whose new coordinate cuts the exceptional divisor
    Mat3 monomial = identity3();
    std::array<std::optional<ChartTranslate>, 3> translates;

    bool operator==(const ChartSubstitution&) const = default;
};

ChartSubstitution identity_chart();

// The chart cover of the blow-up of a possible center: 3 charts for a point,
// 2 for a curve or 2-curve. Generic constants are labeled alpha/beta with the
// given suffix (fresh symbols per blow-up).
std::vector<ChartSubstitution> enumerate_charts(const Center& center,
                                                const std::string& label_suffix = "");

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

struct BranchAssignment {
    std::string label;
    ConstStatus status = ConstStatus::Nonzero;  // Zero or Nonzero

    bool operator==(const BranchAssignment&) const = default;
};

std::string branch_condition_string(const std::vector<BranchAssignment>& cond);

enum class DispositionKind { Toroidal, Unresolved, Undefined };

struct Disposition {
    DispositionKind kind = DispositionKind::Undefined;
    std::string detail;  // catalog case or continuing pattern id
};

struct Branch {
    std::vector<BranchAssignment> condition;
    LocalForm result;
    Mat3 effective_monomial = identity3();  // chart monomial with Zero translates folded in
    std::optional<Disposition> disposition; // filled by the engines
};

struct BranchedForms {
    std::vector<Branch> branches;
};

struct ChartError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Applies a chart to a local form. Every Generic chart constant is split, one
// branch per qualitative assignment; monomial parts compose as E' = E*S with
// S the branch's effective monomial matrix. Requires a validated form with no
// mixed-series row; throws ChartError if a factor's coordinate would be
// substituted non-trivially (never reached from the admissible patterns).
BranchedForms substitute(const LocalForm& form, const ChartSubstitution& chart);

// Row u_i / row u_j for the target chart of a blown-up target: exponent rows
// subtract, factors divide. Empty when a difference would be negative (the
// map to the target chart is undefined here). The denominator row factor must
// be a unit.
std::optional<LocalForm> divide_rows(const LocalForm& form, int numerator, int denominator);

// Canonical presentation: Zero translates fold into the exponents, Nonzero
// translates are absorbed into opaque unit series, divisor bookkeeping drops
// coordinates that no divisor row touches. Idempotent.
LocalForm normalize(const LocalForm& form);

}  // namespace toroidal

#endif
