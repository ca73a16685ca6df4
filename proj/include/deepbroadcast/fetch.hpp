// Copyright (c) 2026 the DeepBroadcast authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace deepbroadcast::fetch {

inline constexpr const char* kDefaultCifarUrl =
    "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz";

/// Extract every `.bin` member of a gzipped ustar archive into `out_dir`
/// (flattened). Returns the extracted file paths.
std::vector<std::string> extract_bin_members(const std::string& targz_path,
                                             const std::string& out_dir);

/// HTTP(S) GET to a file; follows redirects. Requires TLS support for
/// https URLs.
void download(const std::string& url, const std::string& dest_path);

/// Download and unpack the CIFAR-10 binary distribution under
/// `<out_root>/cifar-10-batches-bin`; returns that directory.
std::string fetch_cifar10(const std::string& url, const std::string& out_root);

}  // namespace deepbroadcast::fetch
