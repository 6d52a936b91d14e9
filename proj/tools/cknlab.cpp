#include "cknlab/cli.hpp"

int main(int argc, char** argv) { return cknlab::run(argc, argv); }
