#include "sluxfer/schedules.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sluxfer/error.hpp"
#include "sluxfer/model.hpp"

namespace sluxfer {

ScheduleConfig ScheduleConfig::vanilla(double lr) {
  ScheduleConfig c;
  c.base_lr = lr;
  c.tlr_peak = lr;
  return c;
}

ScheduleConfig ScheduleConfig::guf(double lr, int unfreeze_epoch, double phase2_lr) {
  ScheduleConfig c = vanilla(lr);
  c.unfreeze_epoch = unfreeze_epoch;
  c.tlr_peak = phase2_lr;
  return c;
}

ScheduleConfig ScheduleConfig::guf_discr_tlr(double lr, int unfreeze_epoch, double phase2_peak) {
  ScheduleConfig c = guf(lr, unfreeze_epoch, phase2_peak);
  c.discr_ratio = 2.5;
  c.tlr_floor_ratio = 10.0;
  return c;
}

void ScheduleConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("schedule.") + name + " must be > 0");
  };
  positive(base_lr, "base_lr");
  positive(discr_ratio, "discr_ratio");
  positive(tlr_peak, "tlr_peak");
  positive(tlr_floor_ratio, "tlr_floor_ratio");
  if (!(tlr_warm_fraction > 0.0 && tlr_warm_fraction < 1.0)) {
    throw ValidationError("schedule.tlr_warm_fraction must be in (0, 1)");
  }
  if (unfreeze_epoch < 0) throw ValidationError("schedule.unfreeze_epoch must be >= 0");
  if (max_epochs < 1) throw ValidationError("schedule.max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("schedule.patience must be >= 1");
}

void to_json(nlohmann::json& j, const ScheduleConfig& c) {
  j = {{"base_lr", c.base_lr},
       {"unfreeze_epoch", c.unfreeze_epoch},
       {"discr_ratio", c.discr_ratio},
       {"tlr_peak", c.tlr_peak},
       {"tlr_warm_fraction", c.tlr_warm_fraction},
       {"tlr_floor_ratio", c.tlr_floor_ratio},
       {"max_epochs", c.max_epochs},
       {"patience", c.patience}};
}

void from_json(const nlohmann::json& j, ScheduleConfig& c) {
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    const double lr = j.value("base_lr", c.base_lr);
    const double peak = j.value("tlr_peak", lr);
    const int unfreeze = j.value("unfreeze_epoch", 12);
    if (preset == "vanilla") {
      c = ScheduleConfig::vanilla(lr);
    } else if (preset == "guf") {
      c = ScheduleConfig::guf(lr, unfreeze, peak);
    } else if (preset == "guf+discr+tlr") {
      c = ScheduleConfig::guf_discr_tlr(lr, unfreeze, peak);
    } else {
      throw ValidationError("unknown schedule preset '" + preset + "' (vanilla, guf, guf+discr+tlr)");
    }
  }
  c.base_lr = j.value("base_lr", c.base_lr);
  c.unfreeze_epoch = j.value("unfreeze_epoch", c.unfreeze_epoch);
  c.discr_ratio = j.value("discr_ratio", c.discr_ratio);
  c.tlr_peak = j.value("tlr_peak", c.tlr_peak);
  c.tlr_warm_fraction = j.value("tlr_warm_fraction", c.tlr_warm_fraction);
  c.tlr_floor_ratio = j.value("tlr_floor_ratio", c.tlr_floor_ratio);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
}

double tlr_lr(long step, long total, const ScheduleConfig& cfg) {
  if (total <= 0) throw ValidationError("tlr_lr: total updates must be > 0");
  if (step < 0 || step > total) {
    throw ValidationError("tlr_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
  }
  const double peak = cfg.tlr_peak;
  const double floor = peak / cfg.tlr_floor_ratio;
  const auto cut = static_cast<long>(std::floor(static_cast<double>(total) * cfg.tlr_warm_fraction));
  if (step < cut) return std::lerp(floor, peak, static_cast<double>(step) / static_cast<double>(cut));
  return std::lerp(peak, floor, static_cast<double>(step - cut) / static_cast<double>(total - cut));
}

double group_lr(std::string_view group, double base, const ScheduleConfig& cfg) {
  if (!is_param_group(group)) throw ValidationError("unknown parameter group '" + std::string(group) + "'");
  return is_lower_group(group) ? base / cfg.discr_ratio : base;
}

std::set<std::string> unfreeze_plan(int epoch, const ScheduleConfig& cfg) {
  std::set<std::string> out;
  for (auto g : kParamGroups) {
    if (epoch >= cfg.unfreeze_epoch || !is_lower_group(g)) out.emplace(g);
  }
  return out;
}

double effective_lr(std::string_view group, int epoch, long phase_step, long phase_total, const ScheduleConfig& cfg) {
  if (!is_param_group(group)) throw ValidationError("unknown parameter group '" + std::string(group) + "'");
  if (epoch < cfg.unfreeze_epoch) return is_lower_group(group) ? 0.0 : cfg.base_lr;
  return group_lr(group, tlr_lr(phase_step, phase_total, cfg), cfg);
}

int early_stop(const std::vector<double>& history) {
  if (history.empty()) throw ValidationError("early_stop: empty history");
  return static_cast<int>(std::max_element(history.begin(), history.end()) - history.begin());
}

bool should_stop(const std::vector<double>& history, const ScheduleConfig& cfg) {
  const int n = static_cast<int>(history.size());
  if (n >= cfg.max_epochs) return true;
  if (n == 0) return false;
  const int last = n - 1;
  if (last < cfg.unfreeze_epoch) return false;
  const int anchor = std::max(early_stop(history), cfg.unfreeze_epoch);
  return last - anchor >= cfg.patience;
}

void TrainState::refresh(const ScheduleConfig& cfg) {
  const auto active = unfreeze_plan(epoch, cfg);
  for (auto g : kParamGroups) {
    const std::string name(g);
    frozen[name] = active.count(name) == 0;
    lr[name] = phase_total > 0 ? effective_lr(g, epoch, std::min(phase_step, phase_total), phase_total, cfg)
                               : (frozen[name] ? 0.0 : cfg.base_lr);
  }
}

}  // namespace sluxfer
