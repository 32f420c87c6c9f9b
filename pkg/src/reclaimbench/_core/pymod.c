/* Minimal module object; the function surface is bound through ctypes. */
#include <Python.h>

static struct PyModuleDef rb_coremod = {
    PyModuleDef_HEAD_INIT, "_core", "compiled reclamation core", -1, NULL,
    NULL, NULL, NULL, NULL,
};

PyMODINIT_FUNC PyInit__core(void) { return PyModule_Create(&rb_coremod); }
