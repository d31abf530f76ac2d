#pragma once

#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "ridekit/disc.hpp"
#include "ridekit/pipeline.hpp"
#include "ridekit/retinex.hpp"
#include "ridekit/synth.hpp"

namespace ridekit::capi {

using nlohmann::json;

/// Malformed JSON, wrong value types or unknown keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses `text` into an object; NULL or empty text gives {}.
json parse_object(const char* text);

json to_json(const retinex::Weights& w);
json to_json(const retinex::SolverConfig& s);
json to_json(const retinex::LossBreakdown& l);
json to_json(const synth::SynthSpec& s);
json to_json(const synth::Achieved& a);
json to_json(const dga::AlphaParams& a);
json to_json(const pipeline::PipelineConfig& c);
json to_json(const disc::TheoremReport& r);
json to_json(const pipeline::Metrics& m);
json to_json(const pipeline::SweepResult& r);

/// Each reader overwrites the fields present in `j` and rejects unknown keys.
void read(const json& j, retinex::Weights& w);
void read(const json& j, retinex::SolverConfig& s);
/// Also accepts "rho", applied through synth::with_rho after the other keys.
void read(const json& j, synth::SynthSpec& s);
void read(const json& j, dga::AlphaParams& a);
void read(const json& j, pipeline::PipelineConfig& c);

struct SweepConfig {
  synth::SynthSpec base;
  std::vector<double> targets{synth::kSuiteTargets.begin(), synth::kSuiteTargets.end()};
  int per_target = 10;
  pipeline::PipelineConfig pipeline;
};

json to_json(const SweepConfig& c);
void read(const json& j, SweepConfig& c);

}  // namespace ridekit::capi
