#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajdebug/core/text.hpp"
#include "trajdebug/env/environment.hpp"

namespace trajdbg {

// Household-style text world: locations hold containers, containers hold
// objects, and the task is to move one goal object into one goal receptacle.
struct WorldSpec {
  struct Container {
    std::string name;
    bool openable = false;  // non-openable containers are surfaces, always visible
    std::vector<std::string> contents;
  };
  struct Location {
    std::string name;
    std::vector<Container> containers;
  };

  std::string world_id;
  std::vector<Location> locations;
  std::string start_location;
  struct Goal {
    std::string object;
    std::string receptacle;
  } goal;
  int step_cap = 30;
  int64_t seed = 0;

  Status check() const {
    std::set<std::string> object_names;
    std::set<std::string> container_names;
    bool start_found = false;
    for (const auto& loc : locations) {
      if (loc.name == start_location) start_found = true;
      for (const auto& c : loc.containers) {
        if (!container_names.insert(c.name).second)
          return err(Errc::schema_violation, "duplicate container name: " + c.name);
        for (const auto& o : c.contents)
          if (!object_names.insert(o).second)
            return err(Errc::schema_violation, "duplicate object name: " + o);
      }
    }
    if (!start_found)
      return err(Errc::schema_violation, "start_location is not a location: " + start_location);
    if (!object_names.count(goal.object))
      return err(Errc::schema_violation, "goal object not placed anywhere: " + goal.object);
    if (!container_names.count(goal.receptacle))
      return err(Errc::schema_violation, "goal receptacle does not exist: " + goal.receptacle);
    if (step_cap < 1) return err(Errc::schema_violation, "step_cap must be >= 1");
    return ok_status();
  }

  std::string task_description() const {
    return "put " + goal.object + " in/on " + goal.receptacle;
  }
};

inline nlohmann::json to_json(const WorldSpec& w) {
  nlohmann::json locations = nlohmann::json::array();
  for (const auto& loc : w.locations) {
    nlohmann::json containers = nlohmann::json::array();
    for (const auto& c : loc.containers)
      containers.push_back(
          {{"name", c.name}, {"openable", c.openable}, {"contents", c.contents}});
    locations.push_back({{"name", loc.name}, {"containers", containers}});
  }
  return {{"world_id", w.world_id},
          {"locations", locations},
          {"start_location", w.start_location},
          {"goal", {{"object", w.goal.object}, {"receptacle", w.goal.receptacle}}},
          {"step_cap", w.step_cap},
          {"seed", w.seed}};
}

inline Result<WorldSpec> world_from_json(const nlohmann::json& j) {
  WorldSpec w;
  try {
    w.world_id = j.at("world_id").get<std::string>();
    for (const auto& loc_json : j.at("locations")) {
      WorldSpec::Location loc;
      loc.name = loc_json.at("name").get<std::string>();
      for (const auto& c_json : loc_json.at("containers")) {
        WorldSpec::Container c;
        c.name = c_json.at("name").get<std::string>();
        c.openable = c_json.at("openable").get<bool>();
        for (const auto& o : c_json.at("contents")) c.contents.push_back(o.get<std::string>());
        loc.containers.push_back(std::move(c));
      }
      w.locations.push_back(std::move(loc));
    }
    w.start_location = j.at("start_location").get<std::string>();
    w.goal.object = j.at("goal").at("object").get<std::string>();
    w.goal.receptacle = j.at("goal").at("receptacle").get<std::string>();
    w.step_cap = j.value("step_cap", 30);
    w.seed = j.value("seed", int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    return err(Errc::schema_violation, std::string("world spec: ") + e.what());
  }
  auto check = w.check();
  if (!check.ok()) return check.error();
  return w;
}

// Deterministic episode over a WorldSpec. Invalid actions consume a step but
// leave the world untouched and say why they were rejected.
class GridWorldEnv : public Environment {
 public:
  explicit GridWorldEnv(WorldSpec spec) : spec_(std::move(spec)) {
    descriptor_.env_name = "gridworld";
    descriptor_.task_description = spec_.task_description();
    descriptor_.step_cap = spec_.step_cap;
    descriptor_.deterministic = true;
    descriptor_.seed = spec_.seed;
    reset();
  }

  const EnvDescriptor& descriptor() const override { return descriptor_; }
  bool done() const override { return done_; }
  std::optional<bool> final_success() const override {
    return done_ ? std::optional<bool>(success_) : std::nullopt;
  }
  int steps_taken() const override { return steps_; }

  ActionResult reset() override {
    at_ = spec_.start_location;
    open_.clear();
    inventory_.clear();
    placement_.clear();
    for (const auto& loc : spec_.locations)
      for (const auto& c : loc.containers)
        for (const auto& o : c.contents) placement_[o] = c.name;
    steps_ = 0;
    done_ = false;
    success_ = false;
    ActionResult r;
    r.observation = "You are in the room. Your task is to: " + spec_.task_description() +
                    ". You are at " + at_ + ".";
    r.admissible_actions = admissible();
    return r;
  }

  Result<ActionResult> step(const CanonicalAction& action) override {
    if (done_) return err(Errc::stepped_after_done, "episode already finished");
    ActionResult r;
    if (action.kind == CanonicalAction::Kind::env_action)
      r = apply(action.text);
    else {
      r.invalid_action = true;
      r.observation = "Nothing happens. Only plain environment actions are possible here.";
    }
    ++steps_;
    if (success_) {
      done_ = true;
      r.done = true;
      r.success = true;
    } else if (steps_ >= spec_.step_cap) {
      done_ = true;
      r.done = true;
      r.success = false;
    }
    if (!r.done) r.admissible_actions = admissible();
    return r;
  }

  const WorldSpec& spec() const { return spec_; }

 private:
  struct ContainerRef {
    const WorldSpec::Container* container = nullptr;
    const WorldSpec::Location* location = nullptr;
  };

  ContainerRef find_container(const std::string& name) const {
    for (const auto& loc : spec_.locations)
      for (const auto& c : loc.containers)
        if (iequals(c.name, name)) return {&c, &loc};
    return {};
  }

  // case-insensitive object lookup; returns canonical name when placed
  std::optional<std::string> placed_name(const std::string& object) const {
    for (const auto& [name, _] : placement_)
      if (iequals(name, object)) return name;
    return std::nullopt;
  }

  std::optional<std::string> held_name(const std::string& object) const {
    for (const auto& name : inventory_)
      if (iequals(name, object)) return name;
    return std::nullopt;
  }

  bool container_visible(const WorldSpec::Container& c) const {
    return !c.openable || open_.count(c.name) > 0;
  }

  std::vector<std::string> objects_in(const std::string& container) const {
    std::vector<std::string> out;
    for (const auto& [object, holder] : placement_)
      if (holder == container) out.push_back(object);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::string describe_container(const WorldSpec::Container& c) const {
    if (c.openable && !open_.count(c.name)) return "The " + c.name + " is closed.";
    auto objects = objects_in(c.name);
    std::string prefix = c.openable ? "In the " : "On the ";
    if (objects.empty()) return prefix + c.name + " you see nothing.";
    return prefix + c.name + " you see: " + join(objects, ", ") + ".";
  }

  ActionResult apply(const std::string& normalized) {
    ActionResult r;
    const std::string& a = normalized;
    if (istarts_with(a, "go to ")) {
      const std::string target = a.substr(6);
      for (const auto& loc : spec_.locations) {
        if (iequals(loc.name, target)) {
          if (iequals(at_, loc.name)) {
            r.invalid_action = true;
            r.observation = "Nothing happens. You are already at " + loc.name + ".";
            return r;
          }
          at_ = loc.name;
          std::string obs = "You arrive at " + loc.name + ".";
          for (const auto& c : loc.containers) obs += " " + describe_container(c);
          r.observation = obs;
          return r;
        }
      }
      r.invalid_action = true;
      r.observation = "Nothing happens. There is no place called " + target + ".";
      return r;
    }
    if (istarts_with(a, "open ")) {
      const std::string target = a.substr(5);
      auto ref = find_container(target);
      if (!ref.container) {
        r.invalid_action = true;
        r.observation = "Nothing happens. There is no " + target + ".";
        return r;
      }
      if (!iequals(ref.location->name, at_)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. You are not at " + ref.location->name + ".";
        return r;
      }
      if (!ref.container->openable) {
        r.invalid_action = true;
        r.observation = "Nothing happens. The " + ref.container->name + " cannot be opened.";
        return r;
      }
      if (open_.count(ref.container->name)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. The " + ref.container->name + " is already open.";
        return r;
      }
      open_.insert(ref.container->name);
      auto objects = objects_in(ref.container->name);
      r.observation = "You open the " + ref.container->name + ". " +
                      (objects.empty()
                           ? "It is empty."
                           : "In it you see: " + join(objects, ", ") + ".");
      return r;
    }
    if (istarts_with(a, "take ")) {
      // take <object> from <container>
      const std::string rest = a.substr(5);
      size_t from = rest.rfind(" from ");
      if (from == std::string::npos) {
        r.invalid_action = true;
        r.observation = "Nothing happens. Say: take <object> from <container>.";
        return r;
      }
      const std::string object = rest.substr(0, from);
      const std::string container = rest.substr(from + 6);
      auto ref = find_container(container);
      if (!ref.container || !iequals(ref.location->name, at_)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. There is no " + container + " here.";
        return r;
      }
      if (!container_visible(*ref.container)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. The " + ref.container->name + " is closed.";
        return r;
      }
      auto canonical = placed_name(object);
      if (!canonical || placement_.at(*canonical) != ref.container->name) {
        r.invalid_action = true;
        r.observation =
            "Nothing happens. There is no " + object + " in the " + ref.container->name + ".";
        return r;
      }
      placement_.erase(*canonical);
      inventory_.insert(*canonical);
      r.observation = "You take the " + *canonical + " from the " + ref.container->name + ".";
      return r;
    }
    if (istarts_with(a, "put ")) {
      // put <object> in/on <container>
      const std::string rest = a.substr(4);
      size_t sep = rest.rfind(" in/on ");
      size_t sep_len = 7;
      if (sep == std::string::npos) {
        sep = rest.rfind(" in ");
        sep_len = 4;
      }
      if (sep == std::string::npos) {
        sep = rest.rfind(" on ");
        sep_len = 4;
      }
      if (sep == std::string::npos) {
        r.invalid_action = true;
        r.observation = "Nothing happens. Say: put <object> in/on <container>.";
        return r;
      }
      const std::string object = rest.substr(0, sep);
      const std::string container = rest.substr(sep + sep_len);
      auto held = held_name(object);
      if (!held) {
        r.invalid_action = true;
        r.observation = "Nothing happens. You are not carrying " + object + ".";
        return r;
      }
      auto ref = find_container(container);
      if (!ref.container || !iequals(ref.location->name, at_)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. There is no " + container + " here.";
        return r;
      }
      if (!container_visible(*ref.container)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. The " + ref.container->name + " is closed.";
        return r;
      }
      inventory_.erase(*held);
      placement_[*held] = ref.container->name;
      r.observation = "You put the " + *held + " in/on the " + ref.container->name + ".";
      if (*held == spec_.goal.object && ref.container->name == spec_.goal.receptacle)
        success_ = true;
      return r;
    }
    if (istarts_with(a, "examine ")) {
      const std::string target = a.substr(8);
      auto ref = find_container(target);
      if (!ref.container || !iequals(ref.location->name, at_)) {
        r.invalid_action = true;
        r.observation = "Nothing happens. There is no " + target + " here.";
        return r;
      }
      r.observation = describe_container(*ref.container);
      return r;
    }
    r.invalid_action = true;
    r.observation = "Nothing happens. That action is not recognized here.";
    return r;
  }

  std::vector<std::string> admissible() const {
    std::vector<std::string> out;
    for (const auto& loc : spec_.locations)
      if (!iequals(loc.name, at_)) out.push_back("go to " + loc.name);
    for (const auto& loc : spec_.locations) {
      if (!iequals(loc.name, at_)) continue;
      for (const auto& c : loc.containers) {
        if (c.openable && !open_.count(c.name)) out.push_back("open " + c.name);
        if (container_visible(c))
          for (const auto& o : objects_in(c.name)) out.push_back("take " + o + " from " + c.name);
        if (container_visible(c))
          for (const auto& held : inventory_) out.push_back("put " + held + " in/on " + c.name);
        out.push_back("examine " + c.name);
      }
    }
    return out;
  }

  WorldSpec spec_;
  EnvDescriptor descriptor_;
  std::string at_;
  std::set<std::string> open_;
  std::set<std::string> inventory_;
  std::map<std::string, std::string> placement_;  // object -> container
  int steps_ = 0;
  bool done_ = false;
  bool success_ = false;
};

// Seed-determined world generation for property tests: a handful of
// locations with one container each, objects scattered, one reachable goal.
inline WorldSpec make_random_world(uint64_t seed) {
  SplitMix64 rng(seed);
  static const char* kContainerKinds[] = {"cabinet", "drawer", "shelf", "countertop", "fridge"};
  static const char* kObjects[] = {"mug", "apple", "book", "knife", "plate", "lamp"};

  WorldSpec w;
  w.world_id = "random-" + std::to_string(seed);
  w.seed = static_cast<int64_t>(seed);
  w.step_cap = rng.range(8, 24);
  const int location_count = rng.range(2, 5);
  std::vector<std::string> containers;
  for (int i = 0; i < location_count; ++i) {
    WorldSpec::Container c;
    c.name = std::string(kContainerKinds[rng.below(5)]) + " " + std::to_string(i + 1);
    c.openable = rng.below(2) == 0;
    WorldSpec::Location loc;
    loc.name = c.name;  // ALFWorld-style: receptacles are destinations
    loc.containers.push_back(c);
    w.locations.push_back(loc);
    containers.push_back(c.name);
  }
  const int object_count = rng.range(1, 4);
  std::vector<std::string> objects;
  for (int i = 0; i < object_count; ++i) {
    std::string name = std::string(kObjects[rng.below(6)]) + " " + std::to_string(i + 1);
    auto& loc = w.locations[rng.below(w.locations.size())];
    loc.containers[0].contents.push_back(name);
    objects.push_back(name);
  }
  w.start_location = w.locations[rng.below(w.locations.size())].name;
  w.goal.object = objects[rng.below(objects.size())];
  w.goal.receptacle = containers[rng.below(containers.size())];
  return w;
}

}  // namespace trajdbg
