// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace deepbroadcast {

/// Invalid or inconsistent configuration (bad field values, mismatched specs).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dataset ingestion failures (missing or truncated files).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Signal that cannot be power-normalized (identically zero).
struct degenerate_signal_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Tensor/layer dimension mismatches.
struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Corrupt or incompatible checkpoint files.
struct checkpoint_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace deepbroadcast
