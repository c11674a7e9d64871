#pragma once

// Gait matrices, their sub-automata expansion, and the contact-conditioned
// state machine with upstairs/downstairs reflexes.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmfsm/leg_model.hpp"
#include "pmfsm/types.hpp"

namespace pmfsm {

/// Per-leg joint sub-automaton state.
///   kExtension  (s1): foot travels from the rear support position to the raised front apex.
///   kRetraction (s2): raised foot descends to ground contact.
///   kAdjustment (s3): foot stays on the ground while the hip sweeps backward.
enum class LegPhase : std::uint8_t { kExtension = 1, kRetraction = 2, kAdjustment = 3 };

std::string_view phase_label(LegPhase phase);  // "s1", "s2", "s3"

/// Rows are gait states, columns legs (FL, FR, RL, RR); 1 = transfer, 0 = support.
/// Stored unchecked so that ragged or malformed input can be reported.
struct GaitMatrix {
  std::vector<std::vector<int>> rows;
};

struct GaitValidationError {
  enum class Kind { kShape, kSuccessiveTransfer, kNoSupport };
  Kind kind;
  int row = -1;     // 0-based, -1 when not applicable
  int column = -1;  // 0-based leg index, -1 when not applicable
  std::string message;
};

class GaitMatrixError : public std::runtime_error {
 public:
  explicit GaitMatrixError(GaitValidationError error)
      : std::runtime_error(error.message), error_(std::move(error)) {}
  const GaitValidationError& error() const { return error_; }

 private:
  GaitValidationError error_;
};

using PhaseRow = std::array<LegPhase, kNumLegs>;

struct SubAutomataMatrix {
  std::vector<PhaseRow> rows;

  int num_states() const { return static_cast<int>(rows.size()); }
  /// 1-based state index, matching FsmSnapshot::state_index.
  const PhaseRow& state(int state_index) const { return rows.at(static_cast<std::size_t>(state_index - 1)); }
  int next_state(int state_index) const { return state_index % num_states() + 1; }
};

std::optional<GaitValidationError> validate_gait_matrix(const GaitMatrix& gait);

/// Throws GaitMatrixError when the matrix is invalid.
SubAutomataMatrix expand_gait_matrix(const GaitMatrix& gait);

/// Inverse of the expansion: each (s1, s2) row pair becomes one transfer row.
GaitMatrix collapse_sub_automata(const SubAutomataMatrix& matrix);

/// Text format: one row per line, comma-separated bits in FL,FR,RL,RR order,
/// '#' starts a comment. Throws std::runtime_error on unparsable tokens; shape
/// problems are left to validate_gait_matrix.
GaitMatrix parse_gait_matrix(std::istream& in);
GaitMatrix load_gait_matrix(const std::string& path);
std::string format_gait_matrix(const GaitMatrix& gait);
std::string format_sub_automata(const SubAutomataMatrix& matrix);

GaitMatrix trot_gait();
GaitMatrix stand_gait();
/// Four-beat walk: one transfer leg per row, ordered RL, FL, RR, FR.
GaitMatrix walk_gait();

// ---------------------------------------------------------------------------
// State machine

enum class ReflexKind : std::uint8_t { kNone = 0, kUpstairsStep1 = 1, kUpstairsStep2 = 2, kDownstairs = 3 };

std::string_view reflex_name(ReflexKind kind);

struct Reflex {
  ReflexKind kind = ReflexKind::kNone;
  int leg = -1;  // affected leg, -1 for kNone

  bool active() const { return kind != ReflexKind::kNone; }
  friend bool operator==(const Reflex&, const Reflex&) = default;
};

using PoseOverrides = std::array<std::optional<LegPose>, kNumLegs>;

struct FsmSnapshot {
  int state_index = 1;
  PhaseRow per_leg_phase{};
  Reflex reflex;
  int steps_in_state = 0;
  /// Set once a transfer leg has lost contact during its current transfer
  /// phase; contact on an extending leg only counts as unexpected after that.
  std::array<bool, kNumLegs> lifted_off{};
  /// At most one reflex may fire per FSM state.
  bool reflex_fired_in_state = false;
  /// Termination-pose overrides installed by reflexes; cleared on transition.
  PoseOverrides pose_overrides{};

  friend bool operator==(const FsmSnapshot&, const FsmSnapshot&) = default;
};

struct LocomotionContext {
  ContactFlags contact_flags{};
  JointVector joint_angles = JointVector::Zero();
};

using LegFlags = std::array<bool, kNumLegs>;

class InconsistentStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidReflexTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

FsmSnapshot initial_snapshot(const SubAutomataMatrix& matrix);

/// The transition predicate for leaving the current state: contact on every
/// retraction leg if the row has any, otherwise every extension/adjustment leg
/// has reached its termination pose.
bool transition_predicate(const PhaseRow& row, const ContactFlags& contacts, const LegFlags& targets_reached);

/// Records lift-off of transfer legs from the current contact flags.
FsmSnapshot note_contacts(const FsmSnapshot& fsm, const LocomotionContext& ctx);

/// Moves to the next row, resetting per-state bookkeeping.
FsmSnapshot advance_state(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix);

std::pair<FsmSnapshot, bool> fsm_step(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix,
                                      const LocomotionContext& ctx, const LegFlags& targets_reached);

/// Precondition: fsm.reflex is inactive. Upstairs wins over downstairs.
Reflex check_reflex(const FsmSnapshot& fsm, const LocomotionContext& ctx, const LegFlags& targets_reached);

struct ReflexConfig {
  double lift_fraction = 0.5;     // lift_delta = lift_fraction * h
  double crouch_delta = 0.15;     // rad, rear knee bend in the second upstairs step
  double extend_fraction = 0.3;   // extend_delta = extend_fraction * h
};

/// Installs the pose overrides of `reflex` given the nominal per-leg
/// termination poses for the current modulation.
std::pair<FsmSnapshot, PoseOverrides> apply_reflex(const FsmSnapshot& fsm, const Reflex& reflex,
                                                   const std::array<TerminationPoseSet, kNumLegs>& nominal,
                                                   const ModulationParams& rho, const LegGeometry& geometry,
                                                   const ReflexConfig& config);

/// Progresses an active reflex. `targets_reached` is evaluated against the
/// override targets. Returns the new snapshot and whether the FSM changed state.
std::pair<FsmSnapshot, bool> advance_reflex(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix,
                                            const LocomotionContext& ctx, const LegFlags& targets_reached,
                                            const std::array<TerminationPoseSet, kNumLegs>& nominal,
                                            const ModulationParams& rho, const LegGeometry& geometry,
                                            const ReflexConfig& config);

/// Per-leg phases encoded s1 -> 0, s2 -> 0.5, s3 -> 1, optionally followed by
/// the reflex id scaled into [0, 1].
ObsVector fsm_observation(const FsmSnapshot& fsm, bool include_reflex);

}  // namespace pmfsm
