#include <stdio.h>
#include <string.h>

#include "nbest.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        return 2;
    }
    NbBundle *bundle = NULL;
    if (nb_bundle_load(argv[1], &bundle) != NB_STATUS_OK) {
        fprintf(stderr, "%s\n", nb_last_error_message());
        return 1;
    }
    char *json = NULL;
    NbStatus s = nb_detect_repairs(bundle, "list list flights between oakland and denver", &json);
    if (s != NB_STATUS_OK || strstr(json, "\"corrected\":\"list flights between oakland and denver\"") == NULL) {
        return 1;
    }
    printf("%s\n", json);
    nb_string_free(json);
    if (nb_bundle_load(NULL, NULL) != NB_STATUS_NULL_ARGUMENT || nb_last_error_message() == NULL) {
        return 1;
    }
    nb_bundle_free(bundle);
    return 0;
}
