// Copyright 2026 The fp4lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fp4lab/qat/events.hpp"

#include <map>
#include <sstream>

namespace fp4lab::qat {

const char* to_string(Pass p) {
  switch (p) {
    case Pass::kFprop: return "FPROP";
    case Pass::kDgrad: return "DGRAD";
    case Pass::kWgrad: return "WGRAD";
  }
  return "?";
}

const char* to_string(Role r) {
  switch (r) {
    case Role::kX: return "X";
    case Role::kW: return "W";
    case Role::kG: return "G";
  }
  return "?";
}

const char* to_string(Precision p) { return p == Precision::kFp4 ? "FP4" : "HIGH"; }

std::string event_to_json_line(const QuantEvent& e) {
  std::ostringstream os;
  os << "{\"layer\":\"" << e.layer << "\",\"step\":" << e.step << ",\"pass\":\""
     << to_string(e.pass) << "\",\"role\":\"" << to_string(e.role) << "\",\"precision\":\""
     << to_string(e.precision) << "\",\"geometry\":\""
     << (e.geometry == fp4::BlockKind::kRows1x16 ? "1x16" : "16x16") << "\",\"stochastic\":"
     << (e.stochastic ? "true" : "false") << ",\"rht\":" << (e.rht ? "true" : "false")
     << ",\"reused\":" << (e.reused ? "true" : "false") << "}";
  return os.str();
}

std::string event_log_to_json_lines(const EventLog& log) {
  std::string out;
  for (const auto& e : log) {
    out += event_to_json_line(e);
    out += "\n";
  }
  return out;
}

namespace {

struct Expect {
  Precision precision;
  bool stochastic;
  bool rht;
  bool reused;
  fp4::BlockKind geometry;
  bool check_geometry;
};

// The expected footprint of one (pass, role) slot for an enabled layer.
Expect expected_slot(const RecipeConfig& r, Pass pass, Role role) {
  Expect e{Precision::kHigh, false, false, false, fp4::BlockKind::kRows1x16, false};
  bool fwd_rht = r.rht && r.fwd_only;
  bool bwd_rht = r.rht && !r.fwd_only;
  if (pass == Pass::kFprop) {
    e.precision = Precision::kFp4;
    e.rht = fwd_rht;
    if (role == Role::kW) {
      e.geometry = r.two_d ? fp4::BlockKind::kSquare16x16 : fp4::BlockKind::kRows1x16;
      e.check_geometry = true;
    }
  } else if (pass == Pass::kDgrad) {
    if (role == Role::kG) {
      e.precision = (r.fwd_only || r.chain_rule) ? Precision::kHigh : Precision::kFp4;
      e.stochastic = r.sr && e.precision == Precision::kFp4;
    } else {  // W operand
      e.precision = r.fwd_only ? Precision::kHigh : Precision::kFp4;
      e.reused = !r.fwd_only && (r.chain_rule || r.two_d);
    }
  } else {  // WGRAD
    if (role == Role::kG) {
      e.precision = (r.fwd_only || r.chain_rule) ? Precision::kHigh : Precision::kFp4;
      e.stochastic = r.sr && e.precision == Precision::kFp4;
      e.rht = bwd_rht;
    } else {  // X operand
      e.precision = r.fwd_only ? Precision::kHigh : Precision::kFp4;
      e.reused = !r.fwd_only && r.chain_rule;
      e.rht = bwd_rht && !r.chain_rule;
    }
  }
  return e;
}

}  // namespace

ConformanceReport conformance_check(const RecipeConfig& recipe, const EventLog& log,
                                    bool expect_backward) {
  ConformanceReport rep;
  auto fail = [&rep](const std::string& msg) {
    rep.pass = false;
    rep.failures.push_back(msg);
  };

  if (recipe.is_baseline()) {
    if (!log.empty())
      fail("baseline recipe logged " + std::to_string(log.size()) + " quantization events");
    return rep;
  }

  struct Slot {
    bool seen = false;
    QuantEvent ev;
  };
  std::map<std::string, std::map<std::pair<int, int>, Slot>> layers;
  for (const auto& e : log) {
    auto key = std::make_pair(static_cast<int>(e.pass), static_cast<int>(e.role));
    auto& slot = layers[e.layer][key];
    if (slot.seen) {
      // Multiple steps in one log are fine as long as footprints agree.
      const QuantEvent& p = slot.ev;
      if (p.precision != e.precision || p.stochastic != e.stochastic || p.rht != e.rht ||
          p.reused != e.reused)
        fail("layer " + e.layer + ": inconsistent footprint across events for " +
             std::string(to_string(e.pass)) + "/" + to_string(e.role));
    }
    slot.seen = true;
    slot.ev = e;
  }

  const std::vector<std::pair<Pass, Role>> fwd_slots = {{Pass::kFprop, Role::kX},
                                                        {Pass::kFprop, Role::kW}};
  const std::vector<std::pair<Pass, Role>> bwd_slots = {{Pass::kDgrad, Role::kG},
                                                        {Pass::kDgrad, Role::kW},
                                                        {Pass::kWgrad, Role::kG},
                                                        {Pass::kWgrad, Role::kX}};
  for (auto& [layer, slots] : layers) {
    ++rep.layers_checked;
    std::vector<std::pair<Pass, Role>> wanted = fwd_slots;
    if (expect_backward) wanted.insert(wanted.end(), bwd_slots.begin(), bwd_slots.end());
    for (auto [pass, role] : wanted) {
      auto key = std::make_pair(static_cast<int>(pass), static_cast<int>(role));
      auto it = slots.find(key);
      if (it == slots.end() || !it->second.seen) {
        fail("layer " + layer + ": missing " + std::string(to_string(pass)) + "/" +
             to_string(role) + " event");
        continue;
      }
      const QuantEvent& e = it->second.ev;
      Expect want = expected_slot(recipe, pass, role);
      auto ctx = [&] {
        return "layer " + layer + " " + std::string(to_string(pass)) + "/" + to_string(role);
      };
      if (e.precision != want.precision)
        fail(ctx() + ": precision " + to_string(e.precision) + ", recipe expects " +
             to_string(want.precision));
      if (e.precision == Precision::kFp4 && e.stochastic != want.stochastic)
        fail(ctx() + ": stochastic=" + (e.stochastic ? "true" : "false") + ", expected " +
             (want.stochastic ? "true" : "false"));
      if (e.rht != want.rht)
        fail(ctx() + ": rht=" + (e.rht ? "true" : "false") + ", expected " +
             (want.rht ? "true" : "false"));
      if (e.reused != want.reused)
        fail(ctx() + ": reused=" + (e.reused ? "true" : "false") + ", expected " +
             (want.reused ? "true" : "false"));
      if (want.check_geometry && e.precision == Precision::kFp4 && e.geometry != want.geometry)
        fail(ctx() + ": wrong scaling-block geometry");
    }
    // No slot may carry quantization the recipe forbids.
    for (auto& [key, slot] : slots) {
      Pass pass = static_cast<Pass>(key.first);
      Role role = static_cast<Role>(key.second);
      Expect want = expected_slot(recipe, pass, role);
      if (want.precision == Precision::kHigh && slot.ev.precision == Precision::kFp4)
        fail("layer " + layer + ": unexpected FP4 event in " + std::string(to_string(pass)) +
             "/" + to_string(role));
    }
  }
  if (layers.empty()) fail("no quantization events logged for a quantizing recipe");
  return rep;
}

}  // namespace fp4lab::qat
