#pragma once

#include <string>
#include <string_view>

namespace upsilon {

// SHA-1 of "blob <size>\0" + content as lowercase hex; matches `git hash-object`.
std::string git_blob_sha1(std::string_view content);

}  // namespace upsilon
