// Acceptance runner: one PASS/FAIL line per criterion, exit 0 iff all pass.
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "vacscan/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--list") == 0) {
            vacscan::acceptance::list(std::cout);
            return 0;
        }
        only.emplace_back(argv[i]);
    }
    try {
        return vacscan::acceptance::run(std::cout, only);
    } catch (const vacscan::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
}
