#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sluxfer {

// Fine-tuning policy. Two phases: before `unfreeze_epoch` only the head
// groups train, at `base_lr`; from then on every group trains, heads at the
// slanted-triangular rate and the lower groups at that rate / discr_ratio.
//
// vanilla:        unfreeze_epoch 0, discr_ratio 1, tlr_floor_ratio 1, tlr_peak = base_lr
// guf:            unfreeze_epoch > 0
// guf+discr+tlr:  additionally discr_ratio 2.5, tlr_floor_ratio 10
struct ScheduleConfig {
  double base_lr = 0.0005;
  int unfreeze_epoch = 0;
  double discr_ratio = 1.0;
  double tlr_peak = 0.0005;
  double tlr_warm_fraction = 0.125;
  double tlr_floor_ratio = 1.0;
  int max_epochs = 25;
  int patience = 5;

  static ScheduleConfig vanilla(double lr);
  static ScheduleConfig guf(double lr, int unfreeze_epoch, double phase2_lr);
  static ScheduleConfig guf_discr_tlr(double lr, int unfreeze_epoch, double phase2_peak);

  void validate() const;
  bool operator==(const ScheduleConfig&) const = default;
};

void to_json(nlohmann::json& j, const ScheduleConfig& c);
void from_json(const nlohmann::json& j, ScheduleConfig& c);

// Slanted triangular rate: peak/floor_ratio at step 0, linear up to peak at
// floor(total * warm_fraction), linear down to peak/floor_ratio at total.
// When the warm-up is empty (total * warm_fraction < 1) step 0 is the peak.
double tlr_lr(long step, long total, const ScheduleConfig& cfg);

// base / discr_ratio for the lower groups, base for the heads.
double group_lr(std::string_view group, double base, const ScheduleConfig& cfg);

// Groups that receive updates during `epoch`.
std::set<std::string> unfreeze_plan(int epoch, const ScheduleConfig& cfg);

// Learning rate of `group` at update `phase_step` of the current phase
// (`phase_total` updates planned in it); 0 for a frozen group.
double effective_lr(std::string_view group, int epoch, long phase_step, long phase_total, const ScheduleConfig& cfg);

// Index of the best dev score; the earliest wins ties.
int early_stop(const std::vector<double>& history);

// True once max_epochs have run or `patience` epochs have passed without
// improvement. Patience only counts from the unfreeze epoch on.
bool should_stop(const std::vector<double>& history, const ScheduleConfig& cfg);

struct TrainState {
  int epoch = 0;
  long step = 0;           // global update counter
  long total_steps = 0;    // planned updates for the whole run
  long phase_step = 0;
  long phase_total = 0;
  std::map<std::string, bool> frozen;
  std::map<std::string, double> lr;
  std::vector<double> history;  // dev ICA + EF1 per epoch
  int best_epoch = -1;
  std::string best_checkpoint;

  // Recomputes frozen flags and learning rates from (cfg, epoch, phase_step).
  void refresh(const ScheduleConfig& cfg);
};

}  // namespace sluxfer
