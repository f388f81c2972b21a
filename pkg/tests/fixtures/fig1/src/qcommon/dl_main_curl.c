/* dl_main_curl.c */
