#pragma once

#include <string_view>

namespace bigraph {

inline constexpr std::string_view kLibraryVersion = "1.0.0";

}  // namespace bigraph
