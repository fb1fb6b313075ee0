#include "cli.hpp"

int main(int argc, char** argv) { return robayes::cli::dispatch(argc, argv); }
