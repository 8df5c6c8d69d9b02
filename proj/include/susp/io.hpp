#pragma once

#include <functional>
#include <iosfwd>
#include <string>

namespace susp {

// Writes via a temporary file in the same directory, then renames onto the
// target, so readers never observe a partial artifact.
void atomic_write(const std::string& path,
                  const std::function<void(std::ostream&)>& writer);

std::string read_file(const std::string& path);

}  // namespace susp
