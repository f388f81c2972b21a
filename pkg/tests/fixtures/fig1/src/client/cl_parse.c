/* cl_parse.c */
