#include "copho/cli.hpp"

int main(int argc, char** argv) { return copho::cli::run(argc, argv); }
