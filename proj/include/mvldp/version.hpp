#ifndef MVLDP_VERSION_HPP
#define MVLDP_VERSION_HPP

#define MVLDP_VERSION "0.1.0"

#endif
