#pragma once
// Include-path shim: the vendored single-header json library lives at
// vendor/json.hpp; this forwards the conventional <nlohmann/json.hpp> path.
// Angle brackets skip this file's own directory, landing on vendor/.
#include <json.hpp>
