#include "gridtrade_cli/commands.hpp"

#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Training allocates and frees the same large minibatch matrices every
    // step; without this glibc returns them to the kernel each time.
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 64 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
#endif
    return gridtrade::cli::run(argc, argv, std::cout, std::cerr);
}
