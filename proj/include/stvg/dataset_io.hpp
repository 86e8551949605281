#pragma once

#include <string>

#include "stvg/types.hpp"

namespace stvg::io {

// Line-delimited JSON, format tag "stvg/1": a meta line, then for each video
// one `video` record followed by its `instance` records. Throws ParseError
// (with line number) on malformed records and ValidationError on invariant
// violations.
Dataset load_dataset(const std::string& path);

// Inverse of load_dataset; instances are written grouped by video so that
// load(save(d)) == d field for field.
void save_dataset(const Dataset& d, const std::string& path);

}  // namespace stvg::io
