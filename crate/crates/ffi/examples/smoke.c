#include <stdio.h>
#include "chebyqst.h"
int main(void){ size_t q[1]={6}; double buf[64];
 if (cq_sample_builtin("sin_pi_x",6,buf,64)!=CQ_STATUS_OK) return 1;
 CqConfig*c=cq_config_new(q,1,CQ_MODE_EXACT); cq_config_set_order(c,3);
 CqResult*r=NULL; if(cq_run(c,buf,NULL,64,&r)!=CQ_STATUS_OK){puts(cq_last_error());return 2;}
 printf("%s fid=%f stop=%zu\n",cq_version(),cq_result_fidelity(r),cq_result_stop_order(r));
 cq_result_free(r); cq_config_free(c); return 0;}
