#include <iostream>

#include "catlep_app.hpp"

int main(int argc, char** argv) { return catlep::cli::run(argc, argv, std::cout, std::cerr); }
