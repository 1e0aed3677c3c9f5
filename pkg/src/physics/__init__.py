# Physics modules: hyperfine level scheme, master equation, reflectivity, layer oracle
