#include "seatvc/cli.hpp"

int main(int argc, char** argv) { return seatvc::cli::run(argc, argv); }
