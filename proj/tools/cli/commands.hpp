#pragma once

#include <CLI11.hpp>
#include <functional>

#include "common.hpp"

namespace ridekit::cli {

/// Adds every subcommand to `app`. The parsed subcommand stores its work in
/// `action`, which main runs after parsing succeeds.
void register_commands(CLI::App& app, Common& common, std::function<int()>& action);

}  // namespace ridekit::cli
