#include <iostream>
#include <string>
#include <vector>

#include "tvphase/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return tvphase::cli::dispatch(args, std::cout, std::cerr);
}
