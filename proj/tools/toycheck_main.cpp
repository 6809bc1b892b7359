// Command-line front end for the toy checker.
//
// Usage:
//   toycheck [options] file.v
//     -Q dir prefix        map dir to logical prefix (prefix "" allowed)
//     -R dir prefix        same as -Q
//     --version=pass|fail  select checker version (default pass)
//     --emit-names FILE    write "short qualified" require-resolution lines
//     --stdlib-prefix P    virtual standard-library prefix (default Corelib)
//
// The VERMIN_PATH environment variable adds colon-separated directories as
// unprefixed roots. Exit status: 0 ok, 1 check failed, 2 internal fault.

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "vermin/toycheck.hpp"

int main(int argc, char** argv) {
  vermin::toy::Options opts;
  std::string file;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "-Q" || arg == "-R") {
      if (i + 2 >= argc) {
        std::cerr << "toycheck: " << arg << " needs a directory and a prefix\n";
        return 2;
      }
      opts.paths.push_back({arg, argv[i + 1], argv[i + 2]});
      i += 2;
    } else if (arg.rfind("--version=", 0) == 0) {
      std::string v = arg.substr(10);
      if (v != "pass" && v != "fail") {
        std::cerr << "toycheck: unknown version " << v << "\n";
        return 2;
      }
      opts.fail_version = v == "fail";
    } else if (arg == "--emit-names") {
      if (i + 1 >= argc) {
        std::cerr << "toycheck: --emit-names needs a path\n";
        return 2;
      }
      opts.emit_names_path = argv[++i];
    } else if (arg == "--stdlib-prefix") {
      if (i + 1 >= argc) {
        std::cerr << "toycheck: --stdlib-prefix needs a value\n";
        return 2;
      }
      opts.stdlib_prefix = argv[++i];
    } else if (!arg.empty() && arg[0] == '-') {
      std::cerr << "toycheck: unknown option " << arg << "\n";
      return 2;
    } else {
      if (!file.empty()) {
        std::cerr << "toycheck: multiple input files\n";
        return 2;
      }
      file = arg;
    }
  }
  if (file.empty()) {
    std::cerr << "toycheck: no input file\n";
    return 2;
  }
  if (const char* env = std::getenv("VERMIN_PATH")) {
    std::string v = env;
    std::size_t pos = 0;
    while (pos <= v.size()) {
      std::size_t colon = v.find(':', pos);
      std::string dir = colon == std::string::npos ? v.substr(pos)
                                                   : v.substr(pos, colon - pos);
      if (!dir.empty()) opts.env_dirs.push_back(dir);
      if (colon == std::string::npos) break;
      pos = colon + 1;
    }
  }
  auto result = vermin::toy::check_file(file, opts);
  std::cout << result.log;
  return result.exit_code;
}
