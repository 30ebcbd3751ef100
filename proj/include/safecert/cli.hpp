#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace safecert::cli {

// Exit codes shared by every command.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kInfeasible = 2;
inline constexpr int kVerifyFailed = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace safecert::cli
