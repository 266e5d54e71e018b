#include <string>
#include <vector>

#include "ssmgd/cli.hpp"

int main(int argc, char** argv) {
    return ssmgd::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
