#ifndef TOROIDAL_ENGINES_HPP
#define TOROIDAL_ENGINES_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toroidal/charts.hpp"
#include "toroidal/forms.hpp"
#include "toroidal/rational.hpp"

namespace toroidal {

// ---------------------------------------------------------------------------
// Fibers
// ---------------------------------------------------------------------------

struct FiberEntry {
    int id = 0;
    LocalForm form;
    std::optional<int> locus_tag;  // entries sharing a tag are points of one curve family
};

struct Fiber {
    std::vector<FiberEntry> entries;
};

// ---------------------------------------------------------------------------
// Invariants
// ---------------------------------------------------------------------------

enum class InvariantKind { ALambda, OmegaE, PairProduct };
const char* invariant_name(InvariantKind k);

struct InvariantRecord {
    InvariantKind kind;
    Exp value = 0;
};

// Which curve of a two-point entry the invariant refers to: the divisor
// coordinate whose vanishing (together with the transverse coordinate) cuts
// the curve.
struct CurveChoice {
    int divisor_coord = 0;
};

// Throws EngineError on pattern mismatch.
InvariantRecord compute_invariant(const LocalForm& form, InvariantKind kind,
                                  std::optional<CurveChoice> curve = std::nullopt);

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

enum class StepKind { Substitute, PassToTarget, Recenter, ValuationStep };

struct TraceStep {
    int index = 0;         // running step number
    int blowup = 0;        // blow-up this step belongs to
    StepKind kind = StepKind::Substitute;
    std::string stage;     // "points", "curves", "ordering", "descent", "valuation"

    // Substitute steps
    int before_id = -1;
    LocalForm before;
    Center center;
    ChartSubstitution chart;
    std::vector<BranchAssignment> branch;
    LocalForm result;
    int result_id = -1;
    Mat3 effective_monomial = identity3();

    // PassToTarget steps: pivot target parameter (the exceptional equation)
    int pivot = -1;
    // Recenter steps: parameter recentred and the constant subtracted
    int recentered_param = -1;
    ConstantClass recenter_constant;

    Disposition disposition;
    std::string label;  // human-readable outcome, e.g. "2-point maps to a 3-point"
    std::vector<std::pair<std::string, InvariantRecord>> invariants;

    // Valuation steps
    std::array<Rat, 2> values_before{};
    std::array<Rat, 2> values_after{};
};

enum class Outcome { AllToroidal, AllPrepared, Exhausted };
const char* outcome_name(Outcome o);

struct Trace {
    std::string algorithm;  // "lemma_a", "lemma_b", "valuation", "classify"
    Outcome outcome = Outcome::AllToroidal;
    std::vector<TraceStep> steps;
    long long blowups = 0;
    long long budget = 0;
    std::string note;  // diagnostics on exhaustion, resolution notes
};

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EngineOptions {
    long long budget = -1;  // -1: 10 * (initial max invariant + 1)
};

// ---------------------------------------------------------------------------
// Target-chart passage (shared by both pipelines)
// ---------------------------------------------------------------------------

struct TargetPassage {
    LocalForm form;                  // rows divided by the pivot and recentred
    LocalForm divided;               // the same before recentring
    int pivot;                       // parameter generating the exceptional divisor downstairs
    std::vector<std::pair<int, ConstantClass>> recentered;  // params recentred and constants
};

// Passes a form to the chart of the blown-up target containing the image
// point. ideal_params lists the parameters generating the blown-up ideal (all
// three for a point, u and w for the curve u=w=0). Empty when no parameter
// row divides the others (the map to the target is undefined at this point).
std::optional<TargetPassage> pass_to_target(const LocalForm& form,
                                            const std::vector<int>& ideal_params);

// Pattern id of a continuing (non-passing) form, e.g. "aligned-1pt(a=3,b=3,d=2)".
// Throws EngineError when the form leaves the admissible patterns.
std::string describe_unresolved(const LocalForm& form);

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

// Blow-up of a 2-point of the target: transforms the fiber until the pulled
// back point ideal is invertible everywhere and every branch is classified
// toroidal. Stages: isolated axis points, curves missed by the exceptional
// multiplicity, 2-curve ordering, invariant descent.
Trace run_lemma_a(const Fiber& fiber, const EngineOptions& options = {});

// Blow-up of a curve through a 1-point of the target (local equations
// u = w = 0): repeatedly blows up the curve in the non-invertible locus with
// maximal descent invariant.
Trace run_lemma_b(const Fiber& fiber, const EngineOptions& options = {});

// ---------------------------------------------------------------------------
// Valuation resolver
// ---------------------------------------------------------------------------

struct ValuationState {
    Rat values[2];  // values of u and v, both positive
    bool declared_independent = false;
};

// Subtractive descent on the pair of values: blows up the 2-curve u=v=0 and
// follows the chart containing the center until one value reaches zero (the
// center has left the 2-curve locus). Declared independent pairs resolve with
// no blow-ups.
Trace resolve_dependent_valuation(const ValuationState& state, const EngineOptions& options = {});

// Exposed for the ordering stage and its acceptance checks: repeatedly blows
// up the 2-curve at a 2-point entry while the designated exponent pairs are
// incomparable; returns the trace of that loop alone.
Trace order_monomial_pairs(const LocalForm& form, const EngineOptions& options = {});

}  // namespace toroidal

#endif
