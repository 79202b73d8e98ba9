#include <iostream>

#include "mmgcn/cli.hpp"

int main(int argc, char** argv) { return mmgcn::dispatch(argc, argv, std::cout, std::cerr); }
