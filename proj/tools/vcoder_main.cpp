#include "vcoder/cli.hpp"

int main(int argc, char** argv) {
    return vcoder::cli::run(argc, argv);
}
