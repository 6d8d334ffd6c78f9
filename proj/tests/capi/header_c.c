#include "tapkin_c.h"

const char* tapkin_c_header_version(void) { return tapkin_version(); }
