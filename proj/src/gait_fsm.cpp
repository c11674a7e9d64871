#include "pmfsm/gait_fsm.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

namespace pmfsm {

std::string_view phase_label(LegPhase phase) {
  switch (phase) {
    case LegPhase::kExtension: return "s1";
    case LegPhase::kRetraction: return "s2";
    case LegPhase::kAdjustment: return "s3";
  }
  return "?";
}

std::string_view reflex_name(ReflexKind kind) {
  switch (kind) {
    case ReflexKind::kNone: return "none";
    case ReflexKind::kUpstairsStep1: return "upstairs-1";
    case ReflexKind::kUpstairsStep2: return "upstairs-2";
    case ReflexKind::kDownstairs: return "downstairs";
  }
  return "?";
}

namespace {

GaitValidationError make_error(GaitValidationError::Kind kind, int row, int column, std::string message) {
  return GaitValidationError{kind, row, column, std::move(message)};
}

bool has_transfer(const std::vector<int>& row) {
  for (int bit : row)
    if (bit == 1) return true;
  return false;
}

}  // namespace

std::optional<GaitValidationError> validate_gait_matrix(const GaitMatrix& gait) {
  using Kind = GaitValidationError::Kind;
  if (gait.rows.empty()) return make_error(Kind::kShape, -1, -1, "gait matrix has no rows");
  for (std::size_t r = 0; r < gait.rows.size(); ++r) {
    const auto& row = gait.rows[r];
    if (row.size() != static_cast<std::size_t>(kNumLegs)) {
      return make_error(Kind::kShape, static_cast<int>(r), -1,
                        "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " entries, expected " +
                            std::to_string(kNumLegs));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] != 0 && row[c] != 1) {
        return make_error(Kind::kShape, static_cast<int>(r), static_cast<int>(c),
                          "row " + std::to_string(r + 1) + " column " + std::to_string(c + 1) + " is not 0 or 1");
      }
    }
  }
  for (std::size_t r = 0; r < gait.rows.size(); ++r) {
    bool any_support = false;
    for (int bit : gait.rows[r]) any_support = any_support || bit == 0;
    if (!any_support) {
      return make_error(Kind::kNoSupport, static_cast<int>(r), -1,
                        "row " + std::to_string(r + 1) + " has no supporting leg");
    }
  }
  const std::size_t n = gait.rows.size();
  for (int c = 0; c < kNumLegs; ++c) {
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t next = (r + 1) % n;
      if (gait.rows[r][c] == 1 && gait.rows[next][c] == 1) {
        return make_error(Kind::kSuccessiveTransfer, static_cast<int>(r), c,
                          "successive transfer phases in column " + std::to_string(c + 1) + " (" +
                              std::string(kLegNames[c]) + ") at rows " + std::to_string(r + 1) + " and " +
                              std::to_string(next + 1));
      }
    }
  }
  return std::nullopt;
}

SubAutomataMatrix expand_gait_matrix(const GaitMatrix& gait) {
  if (auto err = validate_gait_matrix(gait)) throw GaitMatrixError(*err);
  SubAutomataMatrix out;
  for (const auto& row : gait.rows) {
    if (!has_transfer(row)) {
      PhaseRow r;
      r.fill(LegPhase::kAdjustment);
      out.rows.push_back(r);
      continue;
    }
    PhaseRow extension;
    PhaseRow retraction;
    for (int c = 0; c < kNumLegs; ++c) {
      const bool transfer = row[static_cast<std::size_t>(c)] == 1;
      extension[c] = transfer ? LegPhase::kExtension : LegPhase::kAdjustment;
      retraction[c] = transfer ? LegPhase::kRetraction : LegPhase::kAdjustment;
    }
    out.rows.push_back(extension);
    out.rows.push_back(retraction);
  }
  return out;
}

GaitMatrix collapse_sub_automata(const SubAutomataMatrix& matrix) {
  GaitMatrix out;
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    const PhaseRow& row = matrix.rows[r];
    bool has_retraction = false;
    for (LegPhase p : row) has_retraction = has_retraction || p == LegPhase::kRetraction;
    if (has_retraction) continue;  // second half of a transfer pair
    std::vector<int> bits(kNumLegs);
    for (int c = 0; c < kNumLegs; ++c) bits[static_cast<std::size_t>(c)] = row[c] == LegPhase::kExtension ? 1 : 0;
    out.rows.push_back(std::move(bits));
  }
  return out;
}

GaitMatrix parse_gait_matrix(std::istream& in) {
  GaitMatrix gait;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    bool blank = true;
    for (char ch : line) blank = blank && std::isspace(static_cast<unsigned char>(ch));
    if (blank) continue;
    std::vector<int> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      std::size_t used = 0;
      int value = 0;
      try {
        value = std::stoi(token, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("gait file line " + std::to_string(line_no) + ": bad token '" + token + "'");
      }
      for (std::size_t i = used; i < token.size(); ++i) {
        if (!std::isspace(static_cast<unsigned char>(token[i])))
          throw std::runtime_error("gait file line " + std::to_string(line_no) + ": bad token '" + token + "'");
      }
      row.push_back(value);
    }
    gait.rows.push_back(std::move(row));
  }
  return gait;
}

GaitMatrix load_gait_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open gait file: " + path);
  return parse_gait_matrix(in);
}

std::string format_gait_matrix(const GaitMatrix& gait) {
  std::ostringstream os;
  os << "# FL,FR,RL,RR (1 = transfer, 0 = support)\n";
  for (const auto& row : gait.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << '\n';
  }
  return os.str();
}

std::string format_sub_automata(const SubAutomataMatrix& matrix) {
  std::ostringstream os;
  os << "state  FL  FR  RL  RR\n";
  for (int i = 1; i <= matrix.num_states(); ++i) {
    os << "S" << i << (i < 10 ? "    " : "   ");
    for (LegPhase p : matrix.state(i)) os << "  " << phase_label(p);
    os << '\n';
  }
  return os.str();
}

GaitMatrix trot_gait() { return GaitMatrix{{{1, 0, 0, 1}, {0, 1, 1, 0}}}; }
GaitMatrix stand_gait() { return GaitMatrix{{{0, 0, 0, 0}}}; }
GaitMatrix walk_gait() { return GaitMatrix{{{0, 0, 1, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0, 1, 0, 0}}}; }

// ---------------------------------------------------------------------------

FsmSnapshot initial_snapshot(const SubAutomataMatrix& matrix) {
  if (matrix.rows.empty()) throw InconsistentStateError("empty sub-automata matrix");
  FsmSnapshot s;
  s.state_index = 1;
  s.per_leg_phase = matrix.state(1);
  return s;
}

namespace {

void check_consistent(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix) {
  if (fsm.state_index < 1 || fsm.state_index > matrix.num_states())
    throw InconsistentStateError("FSM state index " + std::to_string(fsm.state_index) + " outside matrix");
  if (fsm.per_leg_phase != matrix.state(fsm.state_index))
    throw InconsistentStateError("FSM per-leg phases disagree with matrix row " + std::to_string(fsm.state_index));
}

bool row_has(const PhaseRow& row, LegPhase phase) {
  for (LegPhase p : row)
    if (p == phase) return true;
  return false;
}

}  // namespace

bool transition_predicate(const PhaseRow& row, const ContactFlags& contacts, const LegFlags& targets_reached) {
  if (row_has(row, LegPhase::kRetraction)) {
    for (int leg = 0; leg < kNumLegs; ++leg)
      if (row[leg] == LegPhase::kRetraction && !contacts[leg]) return false;
    return true;
  }
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (!targets_reached[leg]) return false;
  return true;
}

FsmSnapshot note_contacts(const FsmSnapshot& fsm, const LocomotionContext& ctx) {
  FsmSnapshot out = fsm;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (fsm.per_leg_phase[leg] != LegPhase::kAdjustment && !ctx.contact_flags[leg]) out.lifted_off[leg] = true;
  }
  return out;
}

FsmSnapshot advance_state(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix) {
  FsmSnapshot out;
  out.state_index = matrix.next_state(fsm.state_index);
  out.per_leg_phase = matrix.state(out.state_index);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    // A leg moving from extension into retraction stays in the same transfer phase.
    out.lifted_off[leg] = fsm.lifted_off[leg] && fsm.per_leg_phase[leg] == LegPhase::kExtension &&
                          out.per_leg_phase[leg] == LegPhase::kRetraction;
  }
  return out;
}

std::pair<FsmSnapshot, bool> fsm_step(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix,
                                      const LocomotionContext& ctx, const LegFlags& targets_reached) {
  check_consistent(fsm, matrix);
  FsmSnapshot current = note_contacts(fsm, ctx);
  if (transition_predicate(current.per_leg_phase, ctx.contact_flags, targets_reached)) {
    return {advance_state(current, matrix), true};
  }
  ++current.steps_in_state;
  return {current, false};
}

Reflex check_reflex(const FsmSnapshot& fsm, const LocomotionContext& ctx, const LegFlags& targets_reached) {
  if (fsm.reflex.active() || fsm.reflex_fired_in_state) return {};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (fsm.per_leg_phase[leg] == LegPhase::kExtension && fsm.lifted_off[leg] && ctx.contact_flags[leg] &&
        !targets_reached[leg]) {
      return {ReflexKind::kUpstairsStep1, leg};
    }
  }
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (fsm.per_leg_phase[leg] == LegPhase::kRetraction && targets_reached[leg] && !ctx.contact_flags[leg]) {
      return {ReflexKind::kDownstairs, leg};
    }
  }
  return {};
}

namespace {

LegPose pose_at_depth(double hip, double depth, const LegGeometry& geom) {
  return clamp_to_limits({hip, knee_for_depth(hip, depth, geom).knee}, geom);
}

const LegPose& nominal_target(const TerminationPoseSet& set, LegPhase phase) {
  switch (phase) {
    case LegPhase::kExtension: return set.e_s1;
    case LegPhase::kRetraction: return set.e_s2;
    case LegPhase::kAdjustment: break;
  }
  return set.e_s3;
}

}  // namespace

std::pair<FsmSnapshot, PoseOverrides> apply_reflex(const FsmSnapshot& fsm, const Reflex& reflex,
                                                   const std::array<TerminationPoseSet, kNumLegs>& nominal,
                                                   const ModulationParams& rho, const LegGeometry& geometry,
                                                   const ReflexConfig& config) {
  if (!reflex.active()) throw InvalidReflexTransition("apply_reflex called without a reflex");
  if (reflex.leg < 0 || reflex.leg >= kNumLegs) throw InvalidReflexTransition("reflex leg index out of range");
  const double z_ground = nominal_height(geometry);
  const int hit = reflex.leg;
  PoseOverrides overrides{};

  switch (reflex.kind) {
    case ReflexKind::kUpstairsStep1: {
      if (fsm.reflex.active()) throw InvalidReflexTransition("upstairs reflex requested while another is active");
      const double lift = rho.height * (1.0 + config.lift_fraction);
      overrides[hit] = pose_at_depth(nominal[hit].e_s1.hip, z_ground - lift, geometry);
      for (int leg = 0; leg < kNumLegs; ++leg) {
        if (leg != hit && fsm.per_leg_phase[leg] == LegPhase::kExtension) overrides[leg] = nominal[leg].e_s3;
      }
      break;
    }
    case ReflexKind::kUpstairsStep2: {
      if (fsm.reflex.kind != ReflexKind::kUpstairsStep1 || fsm.reflex.leg != hit)
        throw InvalidReflexTransition("second upstairs step requires the first on the same leg");
      const double lift = rho.height * (1.0 + config.lift_fraction);
      overrides[hit] = pose_at_depth(nominal[hit].e_s1.hip, z_ground - lift, geometry);
      for (int leg = 2; leg < kNumLegs; ++leg) {
        if (leg == hit) continue;
        LegPose bent = nominal_target(nominal[leg], fsm.per_leg_phase[leg]);
        bent.knee -= config.crouch_delta;
        overrides[leg] = clamp_to_limits(bent, geometry);
      }
      break;
    }
    case ReflexKind::kDownstairs: {
      if (fsm.reflex.active()) throw InvalidReflexTransition("downstairs reflex requested while another is active");
      const double extend = config.extend_fraction * rho.height;
      if (extend == 0.0) {
        overrides[hit] = nominal[hit].e_s2;
      } else {
        overrides[hit] = pose_at_depth(nominal[hit].e_s2.hip, z_ground + geometry.touchdown_depth + extend, geometry);
      }
      for (int leg = 0; leg < kNumLegs; ++leg) {
        if (leg == hit || fsm.per_leg_phase[leg] != LegPhase::kAdjustment || extend == 0.0) continue;
        overrides[leg] = pose_at_depth(nominal[leg].e_s3.hip, z_ground - extend, geometry);
      }
      break;
    }
    case ReflexKind::kNone: break;
  }

  FsmSnapshot out = fsm;
  out.reflex = reflex;
  out.reflex_fired_in_state = true;
  out.pose_overrides = overrides;
  return {out, overrides};
}

std::pair<FsmSnapshot, bool> advance_reflex(const FsmSnapshot& fsm, const SubAutomataMatrix& matrix,
                                            const LocomotionContext& ctx, const LegFlags& targets_reached,
                                            const std::array<TerminationPoseSet, kNumLegs>& nominal,
                                            const ModulationParams& rho, const LegGeometry& geometry,
                                            const ReflexConfig& config) {
  check_consistent(fsm, matrix);
  FsmSnapshot current = note_contacts(fsm, ctx);
  bool all_reached = true;
  for (bool r : targets_reached) all_reached = all_reached && r;

  switch (current.reflex.kind) {
    case ReflexKind::kNone:
      return fsm_step(current, matrix, ctx, targets_reached);
    case ReflexKind::kUpstairsStep1:
      if (all_reached) {
        auto [next, unused] = apply_reflex(current, {ReflexKind::kUpstairsStep2, current.reflex.leg}, nominal, rho,
                                           geometry, config);
        (void)unused;
        return {next, false};
      }
      break;
    case ReflexKind::kUpstairsStep2:
      // The retried extension is complete once every leg is on target; the
      // raised leg then proceeds straight to retraction.
      if (all_reached) return {advance_state(current, matrix), true};
      break;
    case ReflexKind::kDownstairs: {
      const int leg = current.reflex.leg;
      if (ctx.contact_flags[leg]) {
        current.reflex = {};
        return fsm_step(current, matrix, ctx, targets_reached);
      }
      if (all_reached) current.reflex = {};
      break;
    }
  }
  ++current.steps_in_state;
  return {current, false};
}

ObsVector fsm_observation(const FsmSnapshot& fsm, bool include_reflex) {
  ObsVector out(include_reflex ? kNumLegs + 1 : kNumLegs);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    switch (fsm.per_leg_phase[leg]) {
      case LegPhase::kExtension: out[leg] = 0.0; break;
      case LegPhase::kRetraction: out[leg] = 0.5; break;
      case LegPhase::kAdjustment: out[leg] = 1.0; break;
    }
  }
  if (include_reflex) out[kNumLegs] = static_cast<double>(static_cast<int>(fsm.reflex.kind)) / 3.0;
  return out;
}

}  // namespace pmfsm
